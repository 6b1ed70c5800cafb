use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

/// Pearson correlation pooled over every dimension of every pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    /// One side had zero variance; `value` is 1 if the data were identical
    /// and 0 otherwise.
    pub degenerate: bool,
}

pub fn pooled_correlation<'a>(pairs: impl IntoIterator<Item = (&'a [f32], &'a [f32])>) -> Result<Correlation> {
    let (mut n, mut sa, mut sb) = (0.0f64, 0.0f64, 0.0f64);
    let mut all: Vec<(&[f32], &[f32])> = Vec::new();
    for (a, b) in pairs {
        if a.len() != b.len() {
            return Err(shape_err("correlation", format!("{} vs {} values", a.len(), b.len())));
        }
        n += a.len() as f64;
        sa += a.iter().map(|&v| v as f64).sum::<f64>();
        sb += b.iter().map(|&v| v as f64).sum::<f64>();
        all.push((a, b));
    }
    if n == 0.0 {
        return Err(shape_err("correlation", "no values"));
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cab, mut caa, mut cbb) = (0.0f64, 0.0f64, 0.0f64);
    let mut identical = true;
    for (a, b) in &all {
        for (&x, &y) in a.iter().zip(b.iter()) {
            let (dx, dy) = (x as f64 - ma, y as f64 - mb);
            cab += dx * dy;
            caa += dx * dx;
            cbb += dy * dy;
            identical &= x == y;
        }
    }
    if caa == 0.0 || cbb == 0.0 {
        return Ok(Correlation { value: if identical { 1.0 } else { 0.0 }, degenerate: true });
    }
    Ok(Correlation { value: (cab / (caa.sqrt() * cbb.sqrt())).clamp(-1.0, 1.0), degenerate: false })
}

/// Pooled correlations in latent, split-layer and pixel space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub z: Option<Correlation>,
    pub r: Option<Correlation>,
    pub pixels: Correlation,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_anti() {
        let a = [1.0f32, 2.0, 5.0];
        let neg: Vec<f32> = a.iter().map(|v| -v).collect();
        assert_eq!(pooled_correlation([(&a[..], &a[..])]).unwrap().value, 1.0);
        assert!((pooled_correlation([(&a[..], &neg[..])]).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_flagged() {
        let c = [0.5f32; 4];
        let r = pooled_correlation([(&c[..], &c[..])]).unwrap();
        assert!(r.degenerate && r.value == 1.0);
        let d = [0.5f32, 0.5, 0.5, 0.6];
        let r = pooled_correlation([(&c[..], &d[..])]).unwrap();
        assert!(r.degenerate && r.value == 0.0);
        assert!(pooled_correlation([(&c[..], &d[..3])]).is_err());
    }

    #[test]
    fn independent_noise_is_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f32> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(pooled_correlation([(&a[..], &b[..])]).unwrap().value.abs() < 0.05);
    }

    #[test]
    fn pooling_spans_pairs() {
        let (a1, b1) = ([0.0f32, 1.0], [0.0f32, 1.0]);
        let (a2, b2) = ([2.0f32, 3.0], [2.0f32, 3.0]);
        let r = pooled_correlation([(&a1[..], &b1[..]), (&a2[..], &b2[..])]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }
}
