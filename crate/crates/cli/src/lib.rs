//! The `ganscope` command-line pipeline: generate scene datasets, train a
//! generator with one class withheld, measure segmentation statistics and
//! FSD, invert real images and emit a static report.

use std::fmt;

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{ExperimentConfig, Seeds};
pub use pipeline::Run;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit 2).
    Usage(String),
    /// Missing, malformed or inconsistent inputs (exit 3).
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ganscope::Error> for CliError {
    fn from(e: ganscope::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
