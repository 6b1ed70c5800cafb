//! Segmentation statistics: per-class pixel-count means and covariances, the
//! Fréchet segmentation distance and its sampling noise floor.

mod fsd;
mod linalg;
mod record;
mod report;
mod sensitivity;

pub use fsd::{fsd, fsd_parts, fsd_symmetrized, FsdParts};
pub use linalg::{matrix_sqrt_psd, INDEFINITE_TOL, SYMMETRY_TOL};
pub use record::{SegStatsRecord, StatsAccumulator};
pub use report::{histogram_report, HistogramReport, HistogramRow};
pub use sensitivity::{sensitivity_test, SensitivityReport};

#[cfg(test)]
mod tests;
