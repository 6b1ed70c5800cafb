use ganscope::scene::{make_segmaps, ClassInventory, DatasetConfig, SegMap};
use ganscope::segstats::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_maps(n: usize, seed: u64) -> Vec<SegMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let bias = rng.random_range(0..9u8);
            let labels = (0..64).map(|_| if rng.random_bool(0.4) { bias } else { rng.random_range(0..9) }).collect();
            SegMap::new(8, labels).unwrap()
        })
        .collect()
}

/// Plain two-pass mean and covariance.
fn two_pass(maps: &[SegMap], c: usize) -> (Vec<f64>, Vec<f64>) {
    let counts: Vec<Vec<f64>> = maps.iter().map(|m| m.counts(c).unwrap()).collect();
    let n = counts.len() as f64;
    let mean: Vec<f64> = (0..c).map(|j| counts.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let mut cov = vec![0.0; c * c];
    for v in &counts {
        for i in 0..c {
            for j in 0..c {
                cov[i * c + j] += (v[i] - mean[i]) * (v[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    (mean, cov)
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

#[test]
fn streaming_matches_two_pass() {
    let maps = random_maps(1000, 1);
    let classes: Vec<u8> = (0..9).collect();
    let rec = SegStatsRecord::from_maps(&maps, classes.clone()).unwrap();
    let (mean, cov) = two_pass(&maps, 9);
    assert!(rel_close(&rec.mean, &mean, 1e-9));
    assert!(rel_close(&rec.cov, &cov, 1e-9));

    let mut a = StatsAccumulator::new(classes.clone());
    let mut b = StatsAccumulator::new(classes);
    for (i, m) in maps.iter().enumerate() {
        if i % 3 == 0 { a.push(m).unwrap() } else { b.push(m).unwrap() }
    }
    a.merge(&b).unwrap();
    let merged = a.finish().unwrap();
    assert!(rel_close(&merged.mean, &mean, 1e-9));
    assert!(rel_close(&merged.cov, &cov, 1e-9));
}

fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a: Vec<f64> = (0..rank * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..rank).map(|k| a[k * n + i] * a[k * n + j]).sum();
        }
    }
    m
}

fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i * n + j] += a[i * n + k] * b[k * n + j];
            }
        }
    }
    c
}

fn frob(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn sqrt_reconstructs_random_psd_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [1usize, 2, 5, 9, 16, 33, 64] {
        for rank in [n, n.div_ceil(2)] {
            let m = random_psd(n, rank, &mut rng);
            let s = matrix_sqrt_psd(n, &m).unwrap();
            let diff: Vec<f64> = matmul(n, &s, &s).iter().zip(&m).map(|(a, b)| a - b).collect();
            let rel = frob(&diff) / frob(&m).max(f64::EPSILON);
            assert!(rel < 1e-8, "n={n} rank={rank}: {rel}");
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(s[i * n + j], s[j * n + i]);
                }
            }
        }
    }
}

fn random_record(c: usize, rank: usize, rng: &mut ChaCha8Rng) -> SegStatsRecord {
    let scale = rng.random_range(1.0..2000.0);
    SegStatsRecord {
        classes: (0..c as u8).collect(),
        mean: (0..c).map(|_| rng.random_range(0.0..300.0)).collect(),
        cov: random_psd(c, rank, rng).iter().map(|v| v * scale).collect(),
        n: 1000,
    }
}

#[test]
fn fsd_identities_on_random_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let rank = if trial % 4 == 0 { 5 } else { 9 };
        let a = random_record(9, rank, &mut rng);
        let b = random_record(9, 9, &mut rng);
        assert!(fsd(&a, &a).unwrap() < 1e-9, "self distance {}", fsd(&a, &a).unwrap());
        let (ab, ba) = (fsd(&a, &b).unwrap(), fsd(&b, &a).unwrap());
        assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0), "{ab} vs {ba}");
        let parts = fsd_parts(&a, &a).unwrap();
        let scale = parts.trace_g + parts.trace_t;
        assert!(parts.unclamped() > -1e-8 * scale);
        if rank == 9 {
            let alt = fsd_symmetrized(&a, &b).unwrap();
            assert!((alt - ab).abs() <= 1e-9 * ab.max(1.0), "{alt} vs {ab}");
        }
    }
}

#[test]
fn fsd_matches_diagonal_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let c = 9;
        let mk = |rng: &mut ChaCha8Rng| {
            let mut cov = vec![0.0; c * c];
            for i in 0..c {
                cov[i * c + i] = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5000.0) };
            }
            SegStatsRecord {
                classes: (0..c as u8).collect(),
                mean: (0..c).map(|_| rng.random_range(0.0..300.0)).collect(),
                cov,
                n: 50,
            }
        };
        let (g, t) = (mk(&mut rng), mk(&mut rng));
        let closed: f64 = (0..c)
            .map(|i| (g.mean[i] - t.mean[i]).powi(2) + (g.cov[i * c + i].sqrt() - t.cov[i * c + i].sqrt()).powi(2))
            .sum();
        let got = fsd(&g, &t).unwrap();
        assert!((got - closed).abs() <= 1e-9 * closed.max(1.0), "{got} vs {closed}");
    }
}

#[test]
fn noise_floor_shrinks_with_sample_size() {
    let inventory = ClassInventory::default();
    let classes = inventory.label_ids();
    let maps = make_segmaps(&DatasetConfig { n: 8000, seed: 6, canvas: 32, withheld: None }, &inventory).unwrap();
    let mean_floor = |n: usize| -> f64 {
        (0..5).map(|s| sensitivity_test(&maps, &classes, n, s).unwrap().fsd_split).sum::<f64>() / 5.0
    };
    let small = mean_floor(200);
    let large = mean_floor(4000);
    assert!(large < small, "{large} !< {small}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merge_is_order_independent(seed in 0u64..10_000, cut in 2usize..48) {
        let maps = random_maps(50, seed);
        let classes: Vec<u8> = (0..9).collect();
        let whole = SegStatsRecord::from_maps(&maps, classes.clone()).unwrap();
        let mut left = StatsAccumulator::new(classes.clone());
        let mut right = StatsAccumulator::new(classes);
        maps[..cut].iter().for_each(|m| left.push(m).unwrap());
        maps[cut..].iter().for_each(|m| right.push(m).unwrap());
        right.merge(&left).unwrap();
        let merged = right.finish().unwrap();
        prop_assert!(rel_close(&merged.mean, &whole.mean, 1e-9));
        prop_assert!(rel_close(&merged.cov, &whole.cov, 1e-9));
    }

    #[test]
    fn fsd_is_nonnegative(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_record(4, 2, &mut rng);
        let b = random_record(4, 4, &mut rng);
        prop_assert!(fsd(&a, &b).unwrap() >= 0.0);
    }
}
