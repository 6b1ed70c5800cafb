use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::correlation::{pooled_correlation, CorrelationSummary};
use super::encoder::{Encoder, EncoderStack};
use super::loss::{ImageLoss, LossSpec};
use super::optim::{minimize, OptimConfig};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{shape_err, Error, Result};
use crate::generator::GeneratorNet;
use crate::scene::Image;

/// Inversion methods, from plain latent optimisation to layer-wise
/// inversion with perturbed early layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Optimise `z` from a random start.
    A,
    /// Directly trained encoder, single pass.
    B,
    /// Optimise `z` starting from the direct encoder.
    C,
    /// Layer-wise trained and fine-tuned encoder, single pass.
    D,
    /// Optimise `z` starting from the layer-wise encoder.
    E,
    /// Layer-wise encoder, then optimise per-layer perturbations.
    F,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::A, Method::B, Method::C, Method::D, Method::E, Method::F];

    pub fn describe(self) -> &'static str {
        match self {
            Method::A => "optimize z",
            Method::B => "direct encoder",
            Method::C => "direct encoder + optimize z",
            Method::D => "layer-wise encoder",
            Method::E => "layer-wise encoder + optimize z",
            Method::F => "layer-wise encoder + optimize layers",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Method::A => "a",
            Method::B => "b",
            Method::C => "c",
            Method::D => "d",
            Method::E => "e",
            Method::F => "f",
        };
        f.write_str(c)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}; expected one of a-f")))
    }
}

/// Default perturbation weight. Below about 5 the relaxed generator starts
/// drawing objects the full generator cannot.
pub const LAMBDA_REG: f32 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Weight of `Σ mean(δ_i²)` in the layer-wise objective.
    pub lambda_reg: f32,
    pub optim: OptimConfig,
    pub loss: LossSpec,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self { lambda_reg: LAMBDA_REG, optim: OptimConfig::default(), loss: LossSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionResult {
    pub method: Method,
    /// Starting latent.
    pub z0: Vec<f32>,
    /// Final latent; equals `z0` for methods without latent optimisation.
    pub z: Vec<f32>,
    /// Perturbations `δ_1 … δ_n` (method f only).
    pub deltas: Vec<Tensor>,
    /// Split-layer representation `r*`, shape `[1, ..]`.
    pub r: Tensor,
    pub reconstruction: Image,
    /// Objective before the first step and after each step.
    pub loss_trace: Vec<f32>,
}

impl InversionResult {
    pub fn final_loss(&self) -> f32 {
        *self.loss_trace.last().expect("trace has at least one entry")
    }

    pub fn delta_energy(&self) -> f64 {
        self.deltas.iter().flat_map(|d| d.data()).map(|&v| (v as f64) * (v as f64)).sum()
    }
}

/// Known truth for a generated input `x = G(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub z: Option<Vec<f32>>,
    pub r: Option<Tensor>,
    pub image: Image,
}

/// Pooled correlations of a method's results against ground truth.
pub fn correlation_summary(results: &[InversionResult], truths: &[GroundTruth]) -> Result<CorrelationSummary> {
    if results.len() != truths.len() || results.is_empty() {
        return Err(Error::InvalidArgument(format!("{} results for {} truths", results.len(), truths.len())));
    }
    let all_z = truths.iter().all(|t| t.z.is_some());
    let all_r = truths.iter().all(|t| t.r.is_some());
    let z = all_z
        .then(|| pooled_correlation(results.iter().zip(truths).map(|(r, t)| (&r.z[..], &t.z.as_ref().unwrap()[..]))))
        .transpose()?;
    let r = all_r
        .then(|| pooled_correlation(results.iter().zip(truths).map(|(r, t)| (r.r.data(), t.r.as_ref().unwrap().data()))))
        .transpose()?;
    let pixels = pooled_correlation(
        results.iter().zip(truths).map(|(r, t)| (r.reconstruction.tensor().data(), t.image.tensor().data())),
    )?;
    Ok(CorrelationSummary { z, r, pixels })
}

/// Runs the inversion methods against one generator and encoder stack.
pub struct Inverter<'a> {
    gen: &'a GeneratorNet,
    stack: &'a EncoderStack,
    loss: ImageLoss,
    cfg: InversionConfig,
}

type Objective<'o> = Box<dyn FnMut(&[Tensor]) -> Result<(f32, Vec<Vec<f32>>)> + 'o>;

impl<'a> Inverter<'a> {
    pub fn new(gen: &'a GeneratorNet, stack: &'a EncoderStack, cfg: InversionConfig) -> Result<Self> {
        if cfg.lambda_reg < 0.0 || cfg.optim.steps == 0 {
            return Err(Error::InvalidArgument("lambda_reg must be ≥ 0 and the step budget ≥ 1".into()));
        }
        let loss = ImageLoss::new(cfg.loss.clone(), &gen.shapes()[gen.num_layers()])?;
        Ok(Self { gen, stack, loss, cfg })
    }

    pub fn config(&self) -> &InversionConfig {
        &self.cfg
    }

    pub fn image_loss(&self) -> &ImageLoss {
        &self.loss
    }

    fn batch_of_one(&self, x: &Image) -> Result<Tensor> {
        let mut shape = vec![1];
        shape.extend(x.tensor().shape());
        if shape[1..] != self.gen.shapes()[self.gen.num_layers()][..] {
            return Err(shape_err("invert", format!("image {:?} does not match generator output", x.tensor().shape())));
        }
        Tensor::new(shape, x.tensor().data().to_vec())
    }

    fn encode(&self, enc: &Encoder, x: &Tensor) -> Result<Vec<f32>> {
        Ok(enc.encode(x)?.into_data())
    }

    fn latent(&self, z: &[f32]) -> Result<Tensor> {
        Tensor::new(vec![1, z.len()], z.to_vec())
    }

    fn finish(&self, method: Method, z0: Vec<f32>, z: Vec<f32>, trace: Vec<f32>) -> Result<InversionResult> {
        let zt = self.latent(&z)?;
        let r = self.gen.forward_layers(&zt, self.gen.split())?;
        let reconstruction = Image::new(self.gen.forward_from(&r)?.item(0)?)?;
        Ok(InversionResult { method, z0, z, deltas: Vec::new(), r: r.value, reconstruction, loss_trace: trace })
    }

    /// Objective over `z`: `ℓ(x, G(z))`.
    fn z_objective<'o>(&'o self, x: &'o Tensor, xf: &'o Tensor) -> Objective<'o> {
        Box::new(move |p: &[Tensor]| {
            let mut tape = Tape::new();
            let gb = self.gen.bind(&mut tape, false);
            let lb = self.loss.bind(&mut tape);
            let zv = tape.param(&p[0]);
            let y = self.gen.apply(&mut tape, &gb, zv, 0, self.gen.num_layers())?;
            let (xv, fv) = (tape.constant(x), tape.constant(xf));
            let l = self.loss.record(&mut tape, &lb, xv, fv, y)?;
            tape.backward(l)?;
            Ok((tape.scalar(l), vec![tape.grad(zv).map_or(vec![0.0; p[0].numel()], <[f32]>::to_vec)]))
        })
    }

    /// Records `r = δ_n + g_n(… δ_1 + g_1(z0))` and the head on `tape`.
    fn perturbed_forward(&self, tape: &mut Tape, z0: &Tensor, deltas: &[Var]) -> Result<(Var, Var)> {
        let gb = self.gen.bind(tape, false);
        let mut h = tape.constant(z0);
        for (i, &d) in deltas.iter().enumerate() {
            h = self.gen.apply(tape, &gb, h, i, i + 1)?;
            h = tape.add(h, d)?;
        }
        let y = self.gen.apply(tape, &gb, h, deltas.len(), self.gen.num_layers())?;
        Ok((h, y))
    }

    /// Objective over the perturbations: `ℓ(x, G_f(r)) + λ_reg Σ mean(δ_i²)`.
    /// The penalty is a per-layer mean so that it scales like the image loss.
    fn delta_objective<'o>(&'o self, x: &'o Tensor, xf: &'o Tensor, z0: &'o Tensor, lambda_reg: f32) -> Objective<'o> {
        Box::new(move |p: &[Tensor]| {
            let mut tape = Tape::new();
            let lb = self.loss.bind(&mut tape);
            let dv: Vec<Var> = p.iter().map(|d| tape.param(d)).collect();
            let (_, y) = self.perturbed_forward(&mut tape, z0, &dv)?;
            let (xv, fv) = (tape.constant(x), tape.constant(xf));
            let mut l = self.loss.record(&mut tape, &lb, xv, fv, y)?;
            for &d in &dv {
                let sq = tape.sum_squares(d);
                let w = tape.scale(sq, lambda_reg / tape.value(d).len() as f32);
                l = tape.add(l, w)?;
            }
            tape.backward(l)?;
            let grads = dv
                .iter()
                .zip(p)
                .map(|(&v, t)| tape.grad(v).map_or(vec![0.0; t.numel()], <[f32]>::to_vec))
                .collect();
            Ok((tape.scalar(l), grads))
        })
    }

    /// `G_f(δ_n + g_n(… δ_1 + g_1(z0)))` for given perturbations.
    pub fn reconstruct_with_deltas(&self, z0: &[f32], deltas: &[Tensor]) -> Result<(Tensor, Image)> {
        if deltas.len() != self.gen.split() {
            return Err(shape_err("deltas", format!("{} perturbations for split {}", deltas.len(), self.gen.split())));
        }
        let mut tape = Tape::new();
        let dv: Vec<Var> = deltas.iter().map(|d| tape.constant(d)).collect();
        let (r, y) = self.perturbed_forward(&mut tape, &self.latent(z0)?, &dv)?;
        Ok((tape.tensor(r), Image::new(tape.tensor(y).item(0)?)?))
    }

    /// Zero perturbations for every early layer.
    pub fn zero_deltas(&self) -> Vec<Tensor> {
        self.gen.shapes()[1..=self.gen.split()]
            .iter()
            .map(|s| {
                let mut shape = vec![1];
                shape.extend(s);
                Tensor::zeros(shape)
            })
            .collect()
    }

    /// Method f from an explicit starting latent, with optional overrides of
    /// `λ_reg`.
    pub fn invert_layers_from(&self, x: &Image, z0: &[f32], lambda_reg: Option<f32>) -> Result<InversionResult> {
        let xt = self.batch_of_one(x)?;
        let xf = self.loss.features(&xt)?;
        let zt = self.latent(z0)?;
        let lambda = lambda_reg.unwrap_or(self.cfg.lambda_reg);
        let (deltas, trace) = minimize(self.zero_deltas(), &self.cfg.optim, self.delta_objective(&xt, &xf, &zt, lambda))?;
        let (r, reconstruction) = self.reconstruct_with_deltas(z0, &deltas)?;
        Ok(InversionResult {
            method: Method::F,
            z0: z0.to_vec(),
            z: z0.to_vec(),
            deltas,
            r,
            reconstruction,
            loss_trace: trace,
        })
    }

    /// Latent optimisation from an explicit start.
    pub fn optimize_latent_from(&self, method: Method, x: &Image, z0: Vec<f32>) -> Result<InversionResult> {
        let xt = self.batch_of_one(x)?;
        let xf = self.loss.features(&xt)?;
        let (p, trace) = minimize(vec![self.latent(&z0)?], &self.cfg.optim, self.z_objective(&xt, &xf))?;
        let z = p.into_iter().next().unwrap().into_data();
        self.finish(method, z0, z, trace)
    }

    /// Inverts one image. `seed` only affects method a's random start.
    pub fn invert(&self, x: &Image, method: Method, seed: u64) -> Result<InversionResult> {
        let xt = self.batch_of_one(x)?;
        let single = |enc: &Encoder, m: Method| -> Result<InversionResult> {
            let z = self.encode(enc, &xt)?;
            let mut out = self.finish(m, z.clone(), z, Vec::new())?;
            out.loss_trace.push(self.loss.value(&xt, &self.batch_of_one(&out.reconstruction)?)?);
            Ok(out)
        };
        match method {
            Method::A => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let z0 = (0..self.gen.latent_dim()).map(|_| rng.sample(StandardNormal)).collect();
                self.optimize_latent_from(method, x, z0)
            }
            Method::B => single(&self.stack.direct, method),
            Method::C => self.optimize_latent_from(method, x, self.encode(&self.stack.direct, &xt)?),
            Method::D => single(&self.stack.finetuned, method),
            Method::E => self.optimize_latent_from(method, x, self.encode(&self.stack.finetuned, &xt)?),
            Method::F => self.invert_layers_from(x, &self.encode(&self.stack.finetuned, &xt)?, None),
        }
    }

    /// Inverts many images; image `i` uses seed `seed + i`.
    pub fn invert_all(&self, images: &[Image], method: Method, seed: u64) -> Result<Vec<InversionResult>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            images.par_iter().enumerate().map(|(i, x)| self.invert(x, method, seed + i as u64)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            images.iter().enumerate().map(|(i, x)| self.invert(x, method, seed + i as u64)).collect()
        }
    }
}
