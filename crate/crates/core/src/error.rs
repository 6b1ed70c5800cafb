use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("parameter {0} has no gradient")]
    MissingGrad(usize),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is indefinite (smallest eigenvalue {min:.3e}, tolerance {tolerance:.3e})")]
    Indefinite { min: f64, tolerance: f64 },

    #[error("class inventories differ: {0}")]
    ClassMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inversion diverged at step {step}: loss {loss} exceeds 10x the initial {initial}")]
    Diverged { step: usize, loss: f32, initial: f32 },

    #[error("malformed weight file: {0}")]
    Format(String),

    #[error("png: {0}")]
    Png(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape { op, detail: detail.into() }
}
