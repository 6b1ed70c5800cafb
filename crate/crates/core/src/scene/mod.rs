//! Procedural scene world: class inventory, rasteriser, segmenters and the
//! latent parameterisation of scenes.

mod classes;
mod dataset;
mod latent;
mod raster;
mod segment;

pub use classes::{
    background_level, ClassDef, ClassInventory, ShapeFamily, BACKGROUND, MAX_JITTER, MIN_COLOR_SEPARATION,
};
pub use dataset::{item_seed, make_dataset, make_segmaps, DatasetConfig, Sample};
pub use latent::{decode, latent_dim, placement_to_latent, sample_latents, sample_scene, DIMS_PER_CLASS};
pub use raster::{render, segment_exact, Footprint, Instance, SceneSpec};
pub use segment::{segment_image, BACKGROUND_THRESHOLD};

use crate::autodiff::Tensor;
use crate::error::{shape_err, Error, Result};

pub const DEFAULT_CANVAS: usize = 32;

/// RGB image of shape `[3, H, W]` with values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image(Tensor);

impl Image {
    pub fn new(t: Tensor) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 3 || s[1] != s[2] {
            return Err(shape_err("image", format!("expected [3, N, N], got {s:?}")));
        }
        if t.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("image contains non-finite values".into()));
        }
        Ok(Self(t))
    }

    pub fn size(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }
}

/// Per-pixel class labels, row-major, `size × size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegMap {
    size: usize,
    labels: Vec<u8>,
}

impl SegMap {
    pub fn new(size: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != size * size || size == 0 {
            return Err(shape_err("segmap", format!("{} labels for side {size}", labels.len())));
        }
        Ok(Self { size, labels })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.size + x]
    }

    /// Pixel count per label `0..num_labels`; out-of-range labels are an error.
    pub fn counts(&self, num_labels: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; num_labels];
        for &l in &self.labels {
            *out.get_mut(l as usize).ok_or_else(|| {
                Error::ClassMismatch(format!("label {l} outside 0..{num_labels}"))
            })? += 1.0;
        }
        Ok(out)
    }

    /// Fraction of pixels on which two maps agree.
    pub fn agreement(&self, other: &SegMap) -> Result<f64> {
        if self.size != other.size {
            return Err(shape_err("agreement", format!("{} vs {}", self.size, other.size)));
        }
        let same = self.labels.iter().zip(&other.labels).filter(|(a, b)| a == b).count();
        Ok(same as f64 / self.labels.len() as f64)
    }
}

#[cfg(test)]
mod tests;
