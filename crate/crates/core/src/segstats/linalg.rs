use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetry tolerance, scaled by `max(1, max |m_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues down to `-INDEFINITE_TOL · trace` are clamped to zero.
pub const INDEFINITE_TOL: f64 = 1e-8;

pub(crate) fn to_matrix(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}

/// Principal square root of a symmetric positive semi-definite matrix
/// (row-major, `n × n`), via a symmetric eigendecomposition.
pub fn matrix_sqrt_psd(n: usize, m: &[f64]) -> Result<Vec<f64>> {
    if m.len() != n * n || n == 0 {
        return Err(Error::InvalidArgument(format!("{} entries for a {n}×{n} matrix", m.len())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((m[i * n + j] - m[j * n + i]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut sym = to_matrix(n, m);
    sym = (&sym + sym.transpose()) * 0.5;
    let trace = sym.trace();
    let eig = SymmetricEigen::new(sym);
    let floor = -INDEFINITE_TOL * trace.abs().max(f64::MIN_POSITIVE);
    let min = eig.eigenvalues.min();
    if min < floor {
        return Err(Error::Indefinite { min, tolerance: floor });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = s[(i, j)];
        }
    }
    Ok(out)
}
