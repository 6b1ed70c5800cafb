#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classes::ClassInventory;
use super::latent::sample_scene;
use super::raster::{render, segment_exact, SceneSpec};
use super::{Image, SegMap};
use crate::error::Result;

/// One rendered scene with its exact label map and source latent.
#[derive(Clone, Debug)]
pub struct Sample {
    pub latent: Vec<f32>,
    pub scene: SceneSpec,
    pub image: Image,
    pub segmap: SegMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n: usize,
    pub seed: u64,
    pub canvas: usize,
    /// Class id that never appears, if any.
    pub withheld: Option<u8>,
}

/// Per-item seed: a splitmix64 step so neighbouring items are unrelated.
pub fn item_seed(seed: u64, index: usize) -> u64 {
    let mut x = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn make_one(cfg: &DatasetConfig, inventory: &ClassInventory, i: usize) -> Result<Sample> {
    let (latent, scene) = sample_scene(item_seed(cfg.seed, i), inventory, cfg.canvas)?;
    Ok(Sample {
        image: render(&scene, inventory)?,
        segmap: segment_exact(&scene, inventory)?,
        latent,
        scene,
    })
}

/// Builds a dataset. Item `i` depends only on `(seed, i)`, and with
/// `withheld` set the scenes are identical except that the class is gone.
pub fn make_dataset(cfg: &DatasetConfig, inventory: &ClassInventory) -> Result<Vec<Sample>> {
    let inv = match cfg.withheld {
        Some(id) => inventory.withholding(id)?,
        None => inventory.clone(),
    };
    #[cfg(feature = "parallel")]
    let out = (0..cfg.n).into_par_iter().map(|i| make_one(cfg, &inv, i)).collect();
    #[cfg(not(feature = "parallel"))]
    let out = (0..cfg.n).map(|i| make_one(cfg, &inv, i)).collect();
    out
}

/// Exact label maps only; much cheaper than [`make_dataset`].
pub fn make_segmaps(cfg: &DatasetConfig, inventory: &ClassInventory) -> Result<Vec<SegMap>> {
    let inv = match cfg.withheld {
        Some(id) => inventory.withholding(id)?,
        None => inventory.clone(),
    };
    let one = |i: usize| -> Result<SegMap> {
        let (_, scene) = sample_scene(item_seed(cfg.seed, i), &inv, cfg.canvas)?;
        segment_exact(&scene, &inv)
    };
    #[cfg(feature = "parallel")]
    let out = (0..cfg.n).into_par_iter().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let out = (0..cfg.n).map(one).collect();
    out
}
