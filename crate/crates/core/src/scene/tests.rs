use super::*;

fn inv() -> ClassInventory {
    ClassInventory::default()
}

#[test]
fn empty_scene_is_background_everywhere() {
    let scene = SceneSpec { canvas: 32, instances: vec![] };
    let img = render(&scene, &inv()).unwrap();
    assert!(segment_image(&img, &inv()).unwrap().labels().iter().all(|&l| l == BACKGROUND));
    assert!(segment_exact(&scene, &inv()).unwrap().labels().iter().all(|&l| l == BACKGROUND));
    let d = img.tensor().data();
    assert!(d[0] < d[31 * 32]);
}

#[test]
fn uniform_prototype_image_is_one_class() {
    let inventory = inv();
    for class in inventory.classes() {
        let mut data = Vec::new();
        for c in 0..3 {
            data.extend(std::iter::repeat_n(class.color[c] * 2.0 - 1.0, 16 * 16));
        }
        let img = Image::new(Tensor::new(vec![3, 16, 16], data).unwrap()).unwrap();
        let seg = segment_image(&img, &inventory).unwrap();
        assert!(seg.labels().iter().all(|&l| l == class.id), "{}", class.name);
    }
}

#[test]
fn render_is_deterministic_and_bounded() {
    let inventory = inv();
    for seed in 0..50 {
        let (_, a) = sample_scene(seed, &inventory, 32).unwrap();
        let (_, b) = sample_scene(seed, &inventory, 32).unwrap();
        assert_eq!(a, b);
        let img = render(&a, &inventory).unwrap();
        assert_eq!(img, render(&b, &inventory).unwrap());
        assert!(img.tensor().data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn footprints_stay_on_canvas() {
    let inventory = inv();
    for class in inventory.classes() {
        for corner in 0..8 {
            let u = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1].map(|b| b as f32);
            let fp = Footprint::of(class, u, 32);
            assert!(fp.cx - fp.w / 2.0 >= -1e-4 && fp.cx + fp.w / 2.0 <= 32.0 + 1e-4);
            assert!(fp.cy - fp.h / 2.0 >= -1e-4 && fp.cy + fp.h / 2.0 <= 32.0 + 1e-4);
        }
    }
}

#[test]
fn every_shape_draws_pixels() {
    let inventory = inv();
    for class in inventory.classes() {
        let scene = SceneSpec {
            canvas: 32,
            instances: vec![Instance { class_id: class.id, placement: [0.5; 3], jitter: [0.0; 3] }],
        };
        let counts = segment_exact(&scene, &inventory).unwrap().counts(9).unwrap();
        assert!(counts[class.id as usize] > 10.0, "{}", class.name);
        assert_eq!(counts.iter().sum::<f64>(), 1024.0);
    }
}

#[test]
fn bars_alternate_in_two_pixel_bands() {
    let inventory = inv();
    let scene = SceneSpec {
        canvas: 32,
        instances: vec![Instance { class_id: 4, placement: [0.5; 3], jitter: [0.0; 3] }],
    };
    let seg = segment_exact(&scene, &inventory).unwrap();
    let fp = Footprint::of(inventory.get(4).unwrap(), [0.5; 3], 32);
    let x = fp.cx as usize;
    let column: Vec<bool> = (0..32).map(|y| seg.get(x, y) == 4).collect();
    let transitions = column.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(transitions >= 6, "{transitions}");
}

#[test]
fn decode_follows_presence_thresholds() {
    let inventory = inv();
    let all_on = vec![6.0; latent_dim(&inventory)];
    assert_eq!(decode(&all_on, &inventory, 32).unwrap().instances.len(), 8);
    let all_off = vec![-6.0; latent_dim(&inventory)];
    assert!(decode(&all_off, &inventory, 32).unwrap().instances.is_empty());
    let without = inventory.withholding(4).unwrap();
    let scene = decode(&all_on, &without, 32).unwrap();
    assert_eq!(scene.instances.len(), 7);
    assert!(!scene.contains(4));
    assert!(decode(&all_on[1..], &inventory, 32).is_err());
}

#[test]
fn placement_latent_round_trips() {
    for u in [0.01f32, 0.2, 0.5, 0.77, 0.99] {
        let z = placement_to_latent(u);
        let mut latent = vec![6.0; 32];
        latent[1] = z;
        let scene = decode(&latent, &inv(), 32).unwrap();
        assert!((scene.instances[0].placement[0] - u).abs() < 1e-5);
    }
}

#[test]
fn withheld_dataset_differs_only_by_that_class() {
    let inventory = inv();
    let full = make_dataset(&DatasetConfig { n: 200, seed: 3, canvas: 32, withheld: None }, &inventory).unwrap();
    let held =
        make_dataset(&DatasetConfig { n: 200, seed: 3, canvas: 32, withheld: Some(4) }, &inventory).unwrap();
    let mut had_fence = 0;
    for (a, b) in full.iter().zip(&held) {
        assert!(!b.scene.contains(4));
        assert!(b.segmap.labels().iter().all(|&l| l != 4));
        let mut expected = a.scene.clone();
        had_fence += expected.contains(4) as usize;
        expected.instances.retain(|i| i.class_id != 4);
        assert_eq!(expected, b.scene);
    }
    assert!(had_fence > 50);
}

#[test]
fn segmap_rejects_foreign_labels() {
    let seg = SegMap::new(2, vec![0, 1, 2, 12]).unwrap();
    assert!(matches!(seg.counts(9), Err(Error::ClassMismatch(_))));
    assert!(SegMap::new(2, vec![0; 3]).is_err());
}

#[test]
fn validation_rejects_unordered_instances() {
    let i = |c| Instance { class_id: c, placement: [0.5; 3], jitter: [0.0; 3] };
    let scene = SceneSpec { canvas: 32, instances: vec![i(3), i(2)] };
    assert!(render(&scene, &inv()).is_err());
    let scene = SceneSpec { canvas: 32, instances: vec![i(9)] };
    assert!(render(&scene, &inv()).is_err());
}
