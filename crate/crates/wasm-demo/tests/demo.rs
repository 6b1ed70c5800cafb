use ganscope_wasm::{class_list, compare, noise_floor, scene, MAX_SAMPLES};

#[test]
fn scene_buffers_are_rgba_and_deterministic() {
    let s = scene(7, -1).unwrap();
    assert_eq!(s.image_rgba.len(), 4 * s.size * s.size);
    assert_eq!(s.segmap_rgba.len(), 4 * s.size * s.size);
    assert!(s.image_rgba.chunks(4).all(|p| p[3] == 255));
    assert_eq!(s, scene(7, -1).unwrap());
}

#[test]
fn withholding_removes_only_that_class() {
    let seed = (0..200).find(|&s| scene(s, -1).unwrap().visible.iter().any(|c| c.id == 4)).unwrap();
    let full = scene(seed, -1).unwrap();
    let dropped = scene(seed, 4).unwrap();
    assert!(dropped.visible.iter().all(|c| c.id != 4));
    // classes drawn after the withheld one keep at least their pixels
    for c in &full.visible {
        if c.id > 4 {
            assert_eq!(dropped.visible.iter().find(|d| d.id == c.id).map(|d| d.pixels), Some(c.pixels));
        }
    }
}

#[test]
fn bad_arguments_are_errors() {
    assert!(scene(0, 0).is_err());
    assert!(scene(0, 99).is_err());
    assert!(compare(1, 0, -1).is_err());
    assert!(compare(MAX_SAMPLES + 1, 0, -1).is_err());
    assert!(noise_floor(&[], 0).is_err());
}

#[test]
fn withheld_class_dominates_the_noise_floor() {
    let dropped = compare(2000, 3, 4).unwrap();
    let same = compare(2000, 3, -1).unwrap();
    assert!(dropped.fsd > 10.0 * same.fsd, "{} vs {}", dropped.fsd, same.fsd);
    let row = dropped.rows.iter().find(|r| r.class_id == 4).unwrap();
    assert_eq!(row.gen_mean, 0.0);
    assert!(row.true_mean > 0.0);
    assert!(dropped.svg.starts_with("<svg"));
    assert_eq!(dropped.rows.len(), class_list().len());
}

#[test]
fn noise_floor_shrinks_with_sample_size() {
    let p = noise_floor(&[200, 5000], 1).unwrap();
    assert_eq!(p.len(), 2);
    assert!(p[1].fsd_split < p[0].fsd_split);
}
