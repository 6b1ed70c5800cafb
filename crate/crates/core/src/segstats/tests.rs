use super::*;
use crate::scene::{ClassInventory, SegMap};

fn rec(mean: Vec<f64>, cov: Vec<f64>) -> SegStatsRecord {
    let classes = (0..mean.len() as u8).collect();
    SegStatsRecord { classes, mean, cov, n: 100 }
}

#[test]
fn identical_maps_have_zero_covariance() {
    let m = SegMap::new(2, vec![0, 1, 1, 2]).unwrap();
    let r = SegStatsRecord::from_maps([&m, &m], vec![0, 1, 2]).unwrap();
    assert_eq!(r.mean, vec![1.0, 2.0, 1.0]);
    assert!(r.cov.iter().all(|&v| v == 0.0));
}

#[test]
fn hand_computed_unbiased_variance() {
    let a = SegMap::new(2, vec![1, 1, 1, 1]).unwrap();
    let b = SegMap::new(2, vec![0, 0, 1, 1]).unwrap();
    let r = SegStatsRecord::from_maps([&a, &b], vec![0, 1]).unwrap();
    assert_eq!(r.mean[0], 1.0);
    assert_eq!(r.cov[0], 2.0);
    assert_eq!(r.cov[1], -2.0);
}

#[test]
fn accumulator_rejects_bad_input() {
    let mut acc = StatsAccumulator::new(vec![0, 1]);
    acc.push(&SegMap::new(2, vec![0; 4]).unwrap()).unwrap();
    assert!(acc.push(&SegMap::new(3, vec![0; 9]).unwrap()).is_err());
    assert!(acc.push(&SegMap::new(2, vec![0, 0, 0, 5]).unwrap()).is_err());
    assert!(matches!(acc.finish(), Err(crate::Error::InsufficientData(_))));
}

#[test]
fn sqrt_of_simple_matrices() {
    assert_eq!(matrix_sqrt_psd(2, &[1.0, 0.0, 0.0, 1.0]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
    let s = matrix_sqrt_psd(2, &[4.0, 0.0, 0.0, 9.0]).unwrap();
    for (a, b) in s.iter().zip([2.0, 0.0, 0.0, 3.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn sqrt_rejects_asymmetric_and_indefinite() {
    assert!(matches!(matrix_sqrt_psd(2, &[1.0, 0.5, 0.0, 1.0]), Err(crate::Error::NotSymmetric(_))));
    assert!(matches!(matrix_sqrt_psd(2, &[1.0, 0.0, 0.0, -1.0]), Err(crate::Error::Indefinite { .. })));
    let s = matrix_sqrt_psd(2, &[1.0, 0.0, 0.0, -1e-10]).unwrap();
    assert_eq!(s[3], 0.0);
}

#[test]
fn scalar_fsd_examples() {
    let g = rec(vec![2.0], vec![1.0]);
    let t = rec(vec![0.0], vec![1.0]);
    assert!((fsd(&g, &t).unwrap() - 4.0).abs() < 1e-12);
    let g = rec(vec![0.0, 0.0], vec![4.0, 0.0, 0.0, 1.0]);
    let t = rec(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]);
    assert!((fsd(&g, &t).unwrap() - 1.0).abs() < 1e-12);
    assert!((fsd_symmetrized(&g, &t).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn fsd_rejects_class_mismatch() {
    let g = rec(vec![0.0], vec![1.0]);
    let mut t = g.clone();
    t.classes = vec![3];
    assert!(matches!(fsd(&g, &t), Err(crate::Error::ClassMismatch(_))));
}

#[test]
fn histogram_sorts_and_flags() {
    let inv = ClassInventory::default();
    let classes: Vec<u8> = (0..=8).collect();
    let mut t = SegStatsRecord { classes: classes.clone(), mean: vec![500.0; 9], cov: vec![0.0; 81], n: 10 };
    t.mean[1..].copy_from_slice(&[40.0, 90.0, 90.0, 10.0, 300.0, 5.0, 5.0, 1.0]);
    let mut g = t.clone();
    g.mean[4] = 0.0;
    let rep = histogram_report(&g, &t, &inv, 20, 200.0).unwrap();
    assert!(rep.truncated);
    let ids: Vec<u8> = rep.rows.iter().map(|r| r.class_id).collect();
    assert_eq!(ids, vec![5, 2, 3, 1, 4, 6, 7, 8]);
    assert!(rep.rows[0].clipped && !rep.rows[1].clipped);
    let fence = rep.rows.iter().find(|r| r.class_id == 4).unwrap();
    assert_eq!(fence.gen_mean, 0.0);
    assert!(fence.true_mean > 0.0);
    let csv = rep.to_csv();
    assert!(csv.starts_with("class,true_mean,gen_mean,clipped\n"));
    assert_eq!(csv.lines().count(), 9);
    let svg = rep.to_svg("test");
    assert!(svg.starts_with("<svg") && svg.contains("fence"));
    let same = histogram_report(&t, &t, &inv, 3, 1e9).unwrap();
    assert!(!same.truncated && same.rows.len() == 3);
    assert!(same.rows.iter().all(|r| r.true_mean == r.gen_mean));
}

#[test]
fn json_round_trip() {
    let r = rec(vec![1.5, 2.0], vec![1.0, 0.25, 0.25, 2.0]);
    assert_eq!(SegStatsRecord::from_json(&r.to_json().unwrap()).unwrap(), r);
    assert!(SegStatsRecord::from_json(r#"{"classes":[0],"mean":[1],"cov":[],"n":5}"#).is_err());
}

#[test]
fn sensitivity_needs_enough_maps() {
    let maps = vec![SegMap::new(2, vec![0; 4]).unwrap(); 5];
    assert!(sensitivity_test(&maps, &[0], 3, 0).is_err());
    let rep = sensitivity_test(&maps, &[0], 2, 0).unwrap();
    assert_eq!(rep.fsd_split, 0.0);
}
