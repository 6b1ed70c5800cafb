//! The layered generator `G = G_f ∘ g_n ∘ … ∘ g_1` under analysis.

mod train;

pub use train::{evaluate_l1, train, TrainConfig, TrainMode, TrainReport, TrainingSet};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{shape_err, Error, Result};
use crate::nn::{Activation, Bound, LayerSpec, Network};
use crate::scene::Image;
use crate::weights;

pub const DEFAULT_LATENT_DIM: usize = 32;
pub const DEFAULT_SPLIT: usize = 4;

/// Output `r_i` of layer `i` for a batch, shape `[N, ..shapes[i]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivation {
    pub index: usize,
    pub value: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GeneratorMeta {
    latent_dim: usize,
    split: usize,
    inventory: String,
}

/// Feed-forward generator with an explicit split between the early layers
/// `g_1 … g_n` and the head `G_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    latent_dim: usize,
    split: usize,
    net: Network,
    inventory: String,
}

impl GeneratorNet {
    /// Linear projection to 64×4×4 and five transposed convolutions up to a
    /// 3×32×32 image.
    pub fn standard(latent_dim: usize, split: usize, inventory: &str, seed: u64) -> Result<Self> {
        let lr = Activation::LEAKY;
        let mut specs = vec![LayerSpec::linear(&[latent_dim], &[64, 4, 4], lr)];
        let mut push = |c: usize, k: usize, s: usize, act: Activation| -> Result<()> {
            let prev = specs.last().unwrap().output.clone();
            specs.push(LayerSpec::conv_transpose(&prev, c, k, s, 1, act)?);
            Ok(())
        };
        push(64, 3, 1, lr)?;
        push(32, 4, 2, lr)?;
        push(32, 3, 1, lr)?;
        push(16, 4, 2, lr)?;
        push(3, 4, 2, Activation::Tanh)?;
        let net = Network::init(specs, &mut ChaCha8Rng::seed_from_u64(seed))?;
        Self::from_network(net, split, inventory)
    }

    pub fn from_network(net: Network, split: usize, inventory: &str) -> Result<Self> {
        if split == 0 || split >= net.len() {
            return Err(Error::InvalidArgument(format!("split {split} outside 1..{}", net.len())));
        }
        if net.input_shape().len() != 1 {
            return Err(shape_err("generator", format!("latent input must be a vector, got {:?}", net.input_shape())));
        }
        let out = net.output_shape();
        if out.len() != 3 || out[0] != 3 || out[1] != out[2] {
            return Err(shape_err("generator", format!("output must be [3, N, N], got {out:?}")));
        }
        if net.layers().last().unwrap().spec.activation != Activation::Tanh {
            return Err(Error::InvalidArgument("generator head must end in tanh".into()));
        }
        Ok(Self { latent_dim: net.input_shape()[0], split, net, inventory: inventory.to_string() })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn set_split(&mut self, split: usize) -> Result<()> {
        if split == 0 || split >= self.net.len() {
            return Err(Error::InvalidArgument(format!("split {split} outside 1..{}", self.net.len())));
        }
        self.split = split;
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.net.len()
    }

    pub fn inventory_fingerprint(&self) -> &str {
        &self.inventory
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    /// Per-item shape of `r_i`; index 0 is the latent.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut v = vec![vec![self.latent_dim]];
        v.extend(self.net.layers().iter().map(|l| l.spec.output.clone()));
        v
    }

    pub fn image_size(&self) -> usize {
        self.net.output_shape()[1]
    }

    fn check_latent(&self, z: &Tensor) -> Result<()> {
        match z.shape() {
            [_, d] if *d == self.latent_dim => Ok(()),
            s => Err(shape_err("generator", format!("latent batch must be [N, {}], got {s:?}", self.latent_dim))),
        }
    }

    fn check_activation(&self, r: &LayerActivation) -> Result<()> {
        if r.index == 0 || r.index >= self.net.len() {
            return Err(Error::InvalidArgument(format!("layer index {} outside 1..{}", r.index, self.net.len())));
        }
        let want = &self.shapes()[r.index];
        if r.value.shape().len() != want.len() + 1 || r.value.shape()[1..] != want[..] {
            return Err(shape_err("forward_from", format!("r_{} has shape {:?}, expected [N, {want:?}]", r.index, r.value.shape())));
        }
        Ok(())
    }

    /// `r_upto = g_upto(… g_1(z))` for a batch of latents `[N, latent_dim]`.
    pub fn forward_layers(&self, z: &Tensor, upto: usize) -> Result<LayerActivation> {
        self.check_latent(z)?;
        if upto == 0 || upto >= self.net.len() {
            return Err(Error::InvalidArgument(format!("layer index {upto} outside 1..{}", self.net.len())));
        }
        Ok(LayerActivation { index: upto, value: self.net.infer_range(z, 0..upto)? })
    }

    /// Runs the remaining layers on `r_i`; with `i` equal to the split this
    /// is the head `G_f`.
    pub fn forward_from(&self, r: &LayerActivation) -> Result<Tensor> {
        self.check_activation(r)?;
        self.net.infer_range(&r.value, r.index..self.net.len())
    }

    /// `G(z) = G_f(g_n(… g_1(z)))`, evaluated through the split.
    pub fn forward(&self, z: &Tensor) -> Result<Tensor> {
        self.forward_from(&self.forward_layers(z, self.split)?)
    }

    /// Convenience for one latent vector.
    pub fn generate(&self, z: &[f32]) -> Result<Image> {
        let t = Tensor::new(vec![1, z.len()], z.to_vec())?;
        Image::new(self.forward(&t)?.item(0)?)
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        self.net.bind(tape, trainable)
    }

    /// Layers `from..to` recorded on a tape (`from = 0` takes latents).
    pub fn apply(&self, tape: &mut Tape, bound: &Bound, x: Var, from: usize, to: usize) -> Result<Var> {
        self.net.forward_range(tape, bound, x, from..to)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = GeneratorMeta { latent_dim: self.latent_dim, split: self.split, inventory: self.inventory.clone() };
        weights::encode("generator", serde_json::to_value(meta)?, &[("generator", &self.net)])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut nets) = weights::decode(bytes, Some("generator"))?;
        let meta: GeneratorMeta =
            serde_json::from_value(header.meta).map_err(|e| Error::Format(format!("bad generator header: {e}")))?;
        if nets.len() != 1 {
            return Err(Error::Format(format!("expected one network, found {}", nets.len())));
        }
        let g = Self::from_network(nets.remove(0), meta.split, &meta.inventory)?;
        if g.latent_dim != meta.latent_dim {
            return Err(Error::Format(format!("header latent dim {} disagrees with layers", meta.latent_dim)));
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests;
