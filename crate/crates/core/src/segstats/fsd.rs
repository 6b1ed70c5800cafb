use super::linalg::{matrix_sqrt_psd, to_matrix};
use super::record::SegStatsRecord;
use crate::error::{Error, Result};

/// Fréchet segmentation distance with its components.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FsdParts {
    pub mean_term: f64,
    pub trace_g: f64,
    pub trace_t: f64,
    /// `Tr((Σ_t^{1/2} Σ_g Σ_t^{1/2})^{1/2})`.
    pub cross: f64,
}

impl FsdParts {
    pub fn unclamped(&self) -> f64 {
        self.mean_term + self.trace_g + self.trace_t - 2.0 * self.cross
    }

    pub fn value(&self) -> f64 {
        self.unclamped().max(0.0)
    }
}

fn check_pair(g: &SegStatsRecord, t: &SegStatsRecord) -> Result<()> {
    g.validate()?;
    t.validate()?;
    if g.classes != t.classes {
        return Err(Error::ClassMismatch(format!("{:?} vs {:?}", g.classes, t.classes)));
    }
    Ok(())
}

/// Components of the distance between generated statistics `g` and true
/// statistics `t`.
///
/// The cross term is the trace of the square root of
/// `Σ_t^{1/2} Σ_g Σ_t^{1/2}`. That matrix is `A Aᵀ` with
/// `A = Σ_t^{1/2} Σ_g^{1/2}`, so its root's trace is the sum of the
/// singular values of `A`. Taking singular values avoids squaring the
/// condition number, which matters when a class never appears and `Σ_g` is
/// singular.
pub fn fsd_parts(g: &SegStatsRecord, t: &SegStatsRecord) -> Result<FsdParts> {
    check_pair(g, t)?;
    let n = g.dim();
    let mean_term = g.mean.iter().zip(&t.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let trace = |r: &SegStatsRecord| (0..n).map(|i| r.cov[i * n + i]).sum::<f64>();
    let sg = to_matrix(n, &matrix_sqrt_psd(n, &g.cov)?);
    let st = to_matrix(n, &matrix_sqrt_psd(n, &t.cov)?);
    let cross = (st * sg).singular_values().sum();
    Ok(FsdParts { mean_term, trace_g: trace(g), trace_t: trace(t), cross })
}

/// `‖μ_g − μ_t‖² + Tr Σ_g + Tr Σ_t − 2 Tr((Σ_t^{1/2} Σ_g Σ_t^{1/2})^{1/2})`,
/// clamped at zero.
pub fn fsd(g: &SegStatsRecord, t: &SegStatsRecord) -> Result<f64> {
    Ok(fsd_parts(g, t)?.value())
}

/// Same quantity, with the cross term taken literally as the trace of
/// `matrix_sqrt_psd(Σ_t^{1/2} Σ_g Σ_t^{1/2})`. Kept as an independent route
/// for cross-checking [`fsd`].
pub fn fsd_symmetrized(g: &SegStatsRecord, t: &SegStatsRecord) -> Result<f64> {
    check_pair(g, t)?;
    let n = g.dim();
    let st = to_matrix(n, &matrix_sqrt_psd(n, &t.cov)?);
    let inner = &st * to_matrix(n, &g.cov) * &st;
    let inner = (&inner + inner.transpose()) * 0.5;
    let flat: Vec<f64> = (0..n * n).map(|k| inner[(k / n, k % n)]).collect();
    let root = matrix_sqrt_psd(n, &flat)?;
    let cross: f64 = (0..n).map(|i| root[i * n + i]).sum();
    let mean_term: f64 = g.mean.iter().zip(&t.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let tr = |r: &SegStatsRecord| (0..n).map(|i| r.cov[i * n + i]).sum::<f64>();
    Ok((mean_term + tr(g) + tr(t) - 2.0 * cross).max(0.0))
}
