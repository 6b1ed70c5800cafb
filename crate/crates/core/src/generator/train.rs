use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::GeneratorNet;
use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Network};
use crate::scene::Sample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Regress `G(z)` onto the rendering of the scene `z` decodes to.
    Distill,
    /// Non-saturating GAN loss against a small convolutional critic.
    Adversarial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub steps: usize,
    pub batch: usize,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub critic_lr: f32,
    /// Decay the generator learning rate linearly to a tenth over the second
    /// half of training.
    pub anneal: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { mode: TrainMode::Distill, steps: 10_000, batch: 32, lr: 2e-3, beta1: 0.5, beta2: 0.999, critic_lr: 2e-4, anneal: true, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Generator loss at every step, before that step's update.
    pub losses: Vec<f32>,
}

impl TrainReport {
    /// Mean of the last `k` recorded losses.
    pub fn tail_mean(&self, k: usize) -> f32 {
        let k = k.clamp(1, self.losses.len().max(1));
        self.losses[self.losses.len().saturating_sub(k)..].iter().sum::<f32>() / k as f32
    }
}

/// Paired latents and target images.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    latents: Vec<f32>,
    images: Vec<f32>,
    latent_dim: usize,
    image_shape: Vec<usize>,
}

impl TrainingSet {
    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InsufficientData("empty training set".into()))?;
        let latent_dim = first.latent.len();
        let image_shape = first.image.tensor().shape().to_vec();
        let mut latents = Vec::with_capacity(samples.len() * latent_dim);
        let mut images = Vec::with_capacity(samples.len() * first.image.tensor().numel());
        for s in samples {
            if s.latent.len() != latent_dim || s.image.tensor().shape() != image_shape {
                return Err(Error::InvalidArgument("training samples have inconsistent shapes".into()));
            }
            latents.extend_from_slice(&s.latent);
            images.extend_from_slice(s.image.tensor().data());
        }
        Ok(Self { latents, images, latent_dim, image_shape })
    }

    pub fn len(&self) -> usize {
        self.latents.len() / self.latent_dim
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn batch(&self, idx: &[usize]) -> Result<(Tensor, Tensor)> {
        let per: usize = self.image_shape.iter().product();
        let mut z = Vec::with_capacity(idx.len() * self.latent_dim);
        let mut x = Vec::with_capacity(idx.len() * per);
        for &i in idx {
            z.extend_from_slice(&self.latents[i * self.latent_dim..(i + 1) * self.latent_dim]);
            x.extend_from_slice(&self.images[i * per..(i + 1) * per]);
        }
        let mut shape = vec![idx.len()];
        shape.extend(&self.image_shape);
        Ok((Tensor::new(vec![idx.len(), self.latent_dim], z)?, Tensor::new(shape, x)?))
    }
}

/// Mean absolute error between `G(z)` and the targets over the whole set.
pub fn evaluate_l1(gen: &GeneratorNet, data: &TrainingSet) -> Result<f32> {
    let mut total = 0.0f64;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(64) {
        let (z, x) = data.batch(chunk)?;
        let y = gen.forward(&z)?;
        total += y.data().iter().zip(x.data()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>();
    }
    Ok((total / (data.len() * data.image_shape.iter().product::<usize>()) as f64) as f32)
}

fn critic(image: &[usize], rng: &mut ChaCha8Rng) -> Result<Network> {
    let lr = Activation::LEAKY;
    let c1 = LayerSpec::conv(image, 32, 4, 2, 1, lr)?;
    let c2 = LayerSpec::conv(&c1.output, 64, 4, 2, 1, lr)?;
    let head = LayerSpec::linear(&c2.output, &[1], Activation::Identity);
    Network::init(vec![c1, c2, head], rng)
}

/// Trains `gen` in place. Deterministic given `cfg.seed`.
pub fn train(gen: &mut GeneratorNet, data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if cfg.steps == 0 || cfg.batch == 0 {
        return Err(Error::InvalidArgument("steps and batch must be at least 1".into()));
    }
    if data.latent_dim != gen.latent_dim() {
        return Err(Error::InvalidArgument(format!(
            "training latents have {} dims, generator takes {}",
            data.latent_dim,
            gen.latent_dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adam = AdamConfig { lr: cfg.lr, beta1: cfg.beta1, beta2: cfg.beta2, eps: 1e-8 };
    let mut opt = AdamState::new(adam, &gen.network().params());
    let mut losses = Vec::with_capacity(cfg.steps);
    let layers = gen.num_layers();

    let mut disc = match cfg.mode {
        TrainMode::Distill => None,
        TrainMode::Adversarial => {
            let net = critic(&data.image_shape, &mut rng)?;
            let opt = AdamState::new(AdamConfig { lr: cfg.critic_lr, ..adam }, &net.params());
            Some((net, opt))
        }
    };

    for step in 0..cfg.steps {
        if cfg.anneal {
            let half = cfg.steps as f32 / 2.0;
            let t = ((step as f32 - half) / half).clamp(0.0, 1.0);
            opt.set_lr(cfg.lr * (1.0 - 0.9 * t));
        }
        let idx: Vec<usize> = (0..cfg.batch).map(|_| rng.random_range(0..data.len())).collect();
        let (z, x) = data.batch(&idx)?;
        let mut tape = Tape::new();
        let gb = gen.bind(&mut tape, true);
        let loss = match &mut disc {
            None => {
                let zv = tape.constant(&z);
                let y = gen.apply(&mut tape, &gb, zv, 0, layers)?;
                let xv = tape.constant(&x);
                tape.l1(y, xv)?
            }
            Some((d, dopt)) => {
                let noise = Tensor::new(
                    vec![cfg.batch, gen.latent_dim()],
                    (0..cfg.batch * gen.latent_dim()).map(|_| rng.sample(StandardNormal)).collect(),
                )?;
                let fake = gen.forward(&noise)?;
                let mut dt = Tape::new();
                let db = d.bind(&mut dt, true);
                let (rv, fv) = (dt.constant(&x), dt.constant(&fake));
                let real_score = d.forward(&mut dt, &db, rv)?;
                let fake_score = d.forward(&mut dt, &db, fv)?;
                let neg = dt.scale(real_score, -1.0);
                let lr_ = dt.softplus(neg);
                let lf = dt.softplus(fake_score);
                let (sr, sf) = (dt.sum(lr_), dt.sum(lf));
                let dl = dt.add(sr, sf)?;
                let dl = dt.scale(dl, 1.0 / cfg.batch as f32);
                dt.backward(dl)?;
                d.load_grads(&dt, &db)?;
                dopt.step(&mut d.params_mut())?;

                let zv = tape.constant(&noise);
                let y = gen.apply(&mut tape, &gb, zv, 0, layers)?;
                let dbg = d.bind(&mut tape, false);
                let score = d.forward(&mut tape, &dbg, y)?;
                let neg = tape.scale(score, -1.0);
                let sp = tape.softplus(neg);
                let s = tape.sum(sp);
                tape.scale(s, 1.0 / cfg.batch as f32)
            }
        };
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Diverged { step, loss: value, initial: losses.first().copied().unwrap_or(value) });
        }
        losses.push(value);
        tape.backward(loss)?;
        gen.network_mut().load_grads(&tape, &gb)?;
        opt.step(&mut gen.network_mut().params_mut())?;
        if step % 500 == 0 {
            log::debug!("generator step {step}: loss {value:.4}");
        }
    }
    Ok(TrainReport { losses })
}
