//! Dense `f32` tensors with define-by-run reverse-mode differentiation.

mod adam;
pub mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use rand::Rng;

/// Kaiming-uniform initialisation for a layer feeding a leaky-relu with
/// negative slope `slope`.
pub fn kaiming_uniform<R: Rng + ?Sized>(
    shape: impl Into<Vec<usize>>,
    fan_in: usize,
    slope: f32,
    rng: &mut R,
) -> Tensor {
    let gain = (2.0 / (1.0 + slope * slope)).sqrt();
    let bound = gain * (3.0 / fan_in.max(1) as f32).sqrt();
    Tensor::uniform(shape, -bound, bound, rng)
}
