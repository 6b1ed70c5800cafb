use ganscope::scene::*;

fn inv() -> ClassInventory {
    ClassInventory::default()
}

fn with_presence(p: &[f64]) -> ClassInventory {
    let mut classes = inv().classes().to_vec();
    for (c, &p) in classes.iter_mut().zip(p) {
        c.presence = p;
    }
    ClassInventory::new(classes).unwrap()
}

#[test]
fn zero_presence_gives_background_only() {
    let inventory = with_presence(&[0.0; 8]);
    for seed in 0..100 {
        let (_, scene) = sample_scene(seed, &inventory, 32).unwrap();
        assert!(scene.instances.is_empty());
    }
}

#[test]
fn certain_class_is_always_present() {
    let mut p = [0.5; 8];
    p[2] = 1.0;
    let inventory = with_presence(&p);
    for seed in 0..500 {
        assert!(sample_scene(seed, &inventory, 32).unwrap().1.contains(3));
    }
}

#[test]
fn inclusion_rate_matches_presence() {
    let inventory = with_presence(&[0.3; 8]);
    let n = 10_000;
    let mut hits = [0usize; 8];
    for i in 0..n {
        let (_, scene) = sample_scene(item_seed(11, i), &inventory, 32).unwrap();
        for inst in &scene.instances {
            hits[inst.class_id as usize - 1] += 1;
        }
    }
    for h in hits {
        let rate = h as f64 / n as f64;
        assert!((rate - 0.3).abs() < 0.02, "{rate}");
    }
}

#[test]
fn full_canvas_rectangle_stays_in_jitter_band() {
    let mut classes = inv().classes().to_vec();
    classes[0].size_range = (1.0, 1.0);
    classes[0].aspect = 1.0;
    let inventory = ClassInventory::new(classes).unwrap();
    let jitter = [0.05, -0.08, 0.02];
    let scene = SceneSpec { canvas: 32, instances: vec![Instance { class_id: 1, placement: [0.3; 3], jitter }] };
    let img = render(&scene, &inventory).unwrap();
    let color = inventory.get(1).unwrap().color;
    for (i, v) in img.tensor().data().iter().enumerate() {
        let c = i / 1024;
        assert!(((v + 1.0) / 2.0 - color[c]).abs() <= MAX_JITTER + 1e-6);
    }
    assert!(segment_exact(&scene, &inventory).unwrap().labels().iter().all(|&l| l == 1));
}

#[test]
fn disk_area_is_close_to_analytic() {
    let inventory = inv();
    let plant = inventory.get(2).unwrap();
    for us in [0.0f32, 0.5, 1.0] {
        let scene = SceneSpec {
            canvas: 32,
            instances: vec![Instance { class_id: 2, placement: [0.5, 0.5, us], jitter: [0.0; 3] }],
        };
        let fp = Footprint::of(plant, [0.5, 0.5, us], 32);
        let r = fp.w as f64 / 2.0;
        let area = segment_exact(&scene, &inventory).unwrap().counts(9).unwrap()[2];
        let exact = std::f64::consts::PI * r * r;
        assert!((area - exact).abs() <= 2.0 * std::f64::consts::PI * r, "{area} vs {exact}");
    }
}

#[test]
fn image_segmenter_agrees_with_exact_on_rendered_scenes() {
    let inventory = inv();
    let data = make_dataset(&DatasetConfig { n: 1000, seed: 21, canvas: 32, withheld: None }, &inventory).unwrap();
    let mut agree = 0.0;
    for s in &data {
        agree += segment_image(&s.image, &inventory).unwrap().agreement(&s.segmap).unwrap();
    }
    let rate = agree / data.len() as f64;
    eprintln!("agreement {rate:.5}");
    assert!(rate >= 0.995, "agreement {rate}");
}

#[test]
fn datasets_are_reproducible_and_withholding_is_total() {
    let inventory = inv();
    let cfg = DatasetConfig { n: 5, seed: 8, canvas: 32, withheld: None };
    let a = make_dataset(&cfg, &inventory).unwrap();
    let b = make_dataset(&cfg, &inventory).unwrap();
    assert_eq!(a.len(), 5);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.image, y.image);
        assert_eq!(x.segmap, y.segmap);
        assert_eq!(x.scene, y.scene);
    }
    let held = make_segmaps(&DatasetConfig { n: 2000, seed: 8, canvas: 32, withheld: Some(3) }, &inventory).unwrap();
    let total: f64 = held.iter().map(|m| m.counts(9).unwrap()[3]).sum();
    assert_eq!(total, 0.0);
    assert!(make_dataset(&DatasetConfig { withheld: Some(12), ..cfg }, &inventory).is_err());
}

/// Probability that each pixel is covered by class `c`, by midpoint
/// quadrature over the placement cube, times the presence probability.
fn coverage(inventory: &ClassInventory, id: u8, grid: usize) -> Vec<f64> {
    let class = inventory.get(id).unwrap();
    let mut cover = vec![0.0; 1024];
    let w = 1.0 / (grid * grid * grid) as f64;
    for i in 0..grid {
        for j in 0..grid {
            for k in 0..grid {
                let u = [i, j, k].map(|t| (t as f32 + 0.5) / grid as f32);
                let fp = Footprint::of(class, u, 32);
                for y in 0..32 {
                    for x in 0..32 {
                        if fp.covers(class.shape, x as f32 + 0.5, y as f32 + 0.5) {
                            cover[y * 32 + x] += w;
                        }
                    }
                }
            }
        }
    }
    cover.iter().map(|q| q * class.presence).collect()
}

#[test]
fn mean_pixel_counts_match_quadrature_expectation() {
    let inventory = inv();
    let q: Vec<Vec<f64>> = (1..=8).map(|id| coverage(&inventory, id, 24)).collect();
    let mut expected = [0.0f64; 8];
    for c in 0..8 {
        for p in 0..1024 {
            let visible: f64 = q[c + 1..].iter().map(|qq| 1.0 - qq[p]).product();
            expected[c] += q[c][p] * visible;
        }
    }
    let n = 10_000;
    let maps = make_segmaps(&DatasetConfig { n, seed: 5, canvas: 32, withheld: None }, &inventory).unwrap();
    let mut mean = [0.0f64; 8];
    for m in &maps {
        let counts = m.counts(9).unwrap();
        for c in 0..8 {
            mean[c] += counts[c + 1] / n as f64;
        }
    }
    for c in 0..8 {
        let rel = (mean[c] - expected[c]).abs() / expected[c];
        eprintln!("class {} rel {rel:.4}", c + 1);
        assert!(rel < 0.03, "class {}: mc {} vs expected {} ({rel})", c + 1, mean[c], expected[c]);
    }
}
