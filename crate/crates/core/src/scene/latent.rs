use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use super::classes::{ClassInventory, MAX_JITTER};
use super::raster::{Instance, SceneSpec};
use crate::error::{Error, Result};

/// Latent dimensions per class: presence, x, y, size.
pub const DIMS_PER_CLASS: usize = 4;

pub fn latent_dim(inventory: &ClassInventory) -> usize {
    DIMS_PER_CLASS * inventory.len()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Deterministic map from a standard-normal latent to a scene.
///
/// Class `k` is present when `Φ(z[4k]) > 1 - presence_k`; its placement is
/// `Φ(z[4k+1..4k+4])`. Presence is read from `inventory`, so decoding with a
/// withholding inventory drops that class and leaves everything else intact.
pub fn decode(z: &[f32], inventory: &ClassInventory, canvas: usize) -> Result<SceneSpec> {
    if z.len() != latent_dim(inventory) {
        return Err(Error::InvalidArgument(format!(
            "latent has {} dims, inventory needs {}",
            z.len(),
            latent_dim(inventory)
        )));
    }
    let phi = std_normal();
    let mut instances = Vec::new();
    for class in inventory.classes() {
        let k = (class.id as usize - 1) * DIMS_PER_CLASS;
        let u_presence = phi.cdf(z[k] as f64);
        if class.presence > 0.0 && u_presence > 1.0 - class.presence {
            let placement = [1, 2, 3].map(|j| phi.cdf(z[k + j] as f64) as f32);
            instances.push(Instance { class_id: class.id, placement, jitter: [0.0; 3] });
        }
    }
    Ok(SceneSpec { canvas, instances })
}

/// Inverse of the placement part of [`decode`]: returns `Φ⁻¹(u)`, clamped
/// away from infinity.
pub fn placement_to_latent(u: f32) -> f32 {
    let u = (u as f64).clamp(1e-6, 1.0 - 1e-6);
    std_normal().inverse_cdf(u) as f32
}

/// Draws `n` standard-normal latents from `seed`.
pub fn sample_latents(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// A scene drawn from the inventory's distribution, together with the
/// latent that decodes to it (ignoring colour jitter).
pub fn sample_scene(seed: u64, inventory: &ClassInventory, canvas: usize) -> Result<(Vec<f32>, SceneSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f32> = (0..latent_dim(inventory)).map(|_| rng.sample(StandardNormal)).collect();
    let jitter: Vec<[f32; 3]> = (0..inventory.len())
        .map(|_| [0; 3].map(|_| rng.random_range(-MAX_JITTER..=MAX_JITTER)))
        .collect();
    let mut scene = decode(&z, inventory, canvas)?;
    for inst in &mut scene.instances {
        inst.jitter = jitter[inst.class_id as usize - 1];
    }
    Ok((z, scene))
}
