//! Diagnostics for mode collapse in image generators.
//!
//! The crate measures which object classes a generator under-produces by
//! comparing per-class pixel-count statistics of segmented samples against a
//! reference distribution, and visualises individual omissions by inverting
//! the later layers of the generator.

pub mod autodiff;
pub mod error;
pub mod export;
pub mod generator;
pub mod inversion;
pub mod nn;
pub mod scene;
pub mod segstats;
pub mod weights;

pub use error::{Error, Result};
