use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor};
use crate::error::{shape_err, Error, Result};
use crate::generator::GeneratorNet;
use crate::nn::{Activation, LayerKind, LayerSpec, Network};
use crate::weights;

/// Right-inversion weight for the layer inverters.
pub const LAMBDA_R: f32 = 0.01;

/// Hyper-parameters for layer-wise encoder training and fine-tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderTrainConfig {
    pub layer_steps: usize,
    pub layer_lr: f32,
    pub finetune_steps: usize,
    pub finetune_lr: f32,
    /// Learning rate of the directly trained baseline encoder; it gets the
    /// same number of steps as fine-tuning.
    pub direct_lr: f32,
    pub direct_steps: usize,
    pub batch: usize,
    pub lambda_r: f32,
    pub seed: u64,
}

impl Default for EncoderTrainConfig {
    fn default() -> Self {
        Self {
            layer_steps: 1500,
            layer_lr: 1e-3,
            finetune_steps: 1500,
            finetune_lr: 1e-4,
            direct_lr: 1e-3,
            direct_steps: 1500,
            batch: 32,
            lambda_r: LAMBDA_R,
            seed: 0,
        }
    }
}

/// Small network inverting one generator layer: a convolution mirroring the
/// transposed convolution (twice the width), then a 1×1 projection. The
/// latent layer is mirrored by a two-layer perceptron.
pub fn layer_inverter_specs(layer: &LayerSpec) -> Result<Vec<LayerSpec>> {
    let lr = Activation::LEAKY;
    match layer.kind {
        LayerKind::Linear { inputs, .. } => Ok(vec![
            LayerSpec::linear(&layer.output, &[2 * inputs], lr),
            LayerSpec::linear(&[2 * inputs], &layer.input, Activation::Identity),
        ]),
        LayerKind::ConvTranspose { in_channels, kernel, stride, pad, .. } => {
            let c = LayerSpec::conv(&layer.output, 2 * in_channels, kernel, stride, pad, lr)?;
            let p = LayerSpec::conv(&c.output, in_channels, 1, 1, 0, Activation::Identity)?;
            if p.output != layer.input {
                return Err(shape_err("layer inverter", format!("{:?} does not invert to {:?}", p.output, layer.input)));
            }
            Ok(vec![c, p])
        }
        LayerKind::Conv { .. } => Err(Error::InvalidArgument("generator layers are linear or transposed convolutions".into())),
    }
}

/// Inverter for the whole head `G_f`: one mirrored convolution per head
/// layer (last layer first), then a 1×1 projection to the split activation.
pub fn head_inverter_specs(head: &[LayerSpec]) -> Result<Vec<LayerSpec>> {
    let first = head.first().ok_or_else(|| Error::InvalidArgument("empty head".into()))?;
    let mut specs = Vec::new();
    let mut shape = head.last().unwrap().output.clone();
    for layer in head.iter().rev() {
        let LayerKind::ConvTranspose { in_channels, kernel, stride, pad, .. } = layer.kind else {
            return Err(Error::InvalidArgument("head layers must be transposed convolutions".into()));
        };
        let c = LayerSpec::conv(&shape, 2 * in_channels, kernel, stride, pad, Activation::LEAKY)?;
        shape = c.output.clone();
        specs.push(c);
    }
    specs.push(LayerSpec::conv(&shape, first.input[0], 1, 1, 0, Activation::Identity)?);
    if specs.last().unwrap().output != first.input {
        return Err(shape_err("head inverter", format!("does not reach {:?}", first.input)));
    }
    Ok(specs)
}

/// Per-stage training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub steps: usize,
    pub final_left: f32,
    pub final_right: Option<f32>,
}

/// Image-to-latent network assembled from stages `e_f, e_n, …, e_1`.
///
/// Stage boundaries are kept so that the composition `E*` can be taken
/// apart again; the network itself is the plain concatenation, so
/// `E*(x) = e_1(… e_n(e_f(x)))` holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    net: Network,
    stage_lengths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EncoderMeta {
    stage_lengths: Vec<usize>,
    reports: Vec<StageReport>,
}

impl Encoder {
    /// Composes stages ordered image-side first.
    pub fn compose(stages: Vec<Network>) -> Result<Self> {
        let stage_lengths = stages.iter().map(Network::len).collect();
        let layers = stages.into_iter().flat_map(|s| s.layers().to_vec()).collect();
        Ok(Self { net: Network::new(layers)?, stage_lengths })
    }

    /// Untrained encoder with the layer-wise architecture for `gen`.
    pub fn init(gen: &GeneratorNet, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::compose(
            stage_specs(gen)?
                .into_iter()
                .map(|s| Network::init(s, &mut rng))
                .collect::<Result<_>>()?,
        )
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn stage_lengths(&self) -> &[usize] {
        &self.stage_lengths
    }

    /// Images `[N, 3, H, W]` to latents `[N, d]`.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.net.infer(x)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = EncoderMeta { stage_lengths: self.stage_lengths.clone(), reports: Vec::new() };
        weights::encode("encoder", serde_json::to_value(meta)?, &[("encoder", &self.net)])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut nets) = weights::decode(bytes, Some("encoder"))?;
        let meta: EncoderMeta =
            serde_json::from_value(header.meta).map_err(|e| Error::Format(format!("bad encoder header: {e}")))?;
        let net = nets.pop().ok_or_else(|| Error::Format("encoder file holds no network".into()))?;
        if meta.stage_lengths.iter().sum::<usize>() != net.len() {
            return Err(Error::Format("stage lengths disagree with layer count".into()));
        }
        Ok(Self { net, stage_lengths: meta.stage_lengths })
    }
}

/// Stage architectures `[e_f, e_n, …, e_1]` for the generator's split.
pub fn stage_specs(gen: &GeneratorNet) -> Result<Vec<Vec<LayerSpec>>> {
    let specs = gen.network().specs();
    let split = gen.split();
    let mut out = vec![head_inverter_specs(&specs[split..])?];
    for i in (0..split).rev() {
        out.push(layer_inverter_specs(&specs[i])?);
    }
    Ok(out)
}

fn latent_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<Tensor> {
    Tensor::new(vec![n, d], (0..n * d).map(|_| rng.sample(StandardNormal)).collect())
}

/// Mean `(L_L, L_R)` of an inverter for generator layers `from..to` over
/// on-manifold samples.
pub fn inversion_losses(gen: &GeneratorNet, inverter: &Network, from: usize, to: usize, z: &Tensor) -> Result<(f32, f32)> {
    let r_in = if from == 0 { z.clone() } else { gen.network().infer_range(z, 0..from)? };
    let r_out = gen.network().infer_range(&r_in, from..to)?;
    let back = inverter.infer(&r_out)?;
    let again = gen.network().infer_range(&back, from..to)?;
    let l1 = |a: &Tensor, b: &Tensor| {
        (a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.numel() as f64) as f32
    };
    Ok((l1(&r_in, &back), l1(&r_out, &again)))
}

/// Trains one inverter for generator layers `from..to` on
/// `L_L + λ_R · L_R`, sampling `r_from` by pushing random latents through
/// the earlier layers.
#[allow(clippy::too_many_arguments)]
pub fn train_layer_inverter(
    gen: &GeneratorNet,
    inverter: &mut Network,
    from: usize,
    to: usize,
    steps: usize,
    lr: f32,
    lambda_r: f32,
    batch: usize,
    seed: u64,
) -> Result<(f32, f32)> {
    if inverter.input_shape() != gen.shapes()[to] || inverter.output_shape() != gen.shapes()[from] {
        return Err(shape_err(
            "train_layer_inverter",
            format!(
                "inverter maps {:?} to {:?}, layers {from}..{to} need {:?} to {:?}",
                inverter.input_shape(),
                inverter.output_shape(),
                gen.shapes()[to],
                gen.shapes()[from]
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamState::new(AdamConfig::with_lr(lr), &inverter.params());
    let mut last = (f32::NAN, f32::NAN);
    for _ in 0..steps {
        let z = latent_batch(&mut rng, batch, gen.latent_dim())?;
        let r_in = if from == 0 { z } else { gen.network().infer_range(&z, 0..from)? };
        let r_out = gen.network().infer_range(&r_in, from..to)?;
        let mut tape = Tape::new();
        let eb = inverter.bind(&mut tape, true);
        let gb = gen.bind(&mut tape, false);
        let (iv, ov) = (tape.constant(&r_in), tape.constant(&r_out));
        let back = inverter.forward(&mut tape, &eb, ov)?;
        let left = tape.l1(back, iv)?;
        let again = gen.apply(&mut tape, &gb, back, from, to)?;
        let right = tape.l1(again, ov)?;
        let weighted = tape.scale(right, lambda_r);
        let loss = tape.add(left, weighted)?;
        last = (tape.scalar(left), tape.scalar(right));
        if !tape.scalar(loss).is_finite() {
            return Err(Error::Diverged { step: opt.steps() as usize, loss: tape.scalar(loss), initial: f32::NAN });
        }
        tape.backward(loss)?;
        inverter.load_grads(&tape, &eb)?;
        opt.step(&mut inverter.params_mut())?;
    }
    Ok(last)
}

/// Trains `enc` end to end on `‖z − E(G(z))‖₁ + ‖G(z) − G(E(G(z)))‖₁`.
pub fn train_end_to_end(gen: &GeneratorNet, enc: &mut Encoder, steps: usize, lr: f32, batch: usize, seed: u64) -> Result<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamState::new(AdamConfig::with_lr(lr), &enc.net.params());
    let layers = gen.num_layers();
    let mut last = f32::NAN;
    for _ in 0..steps {
        let z = latent_batch(&mut rng, batch, gen.latent_dim())?;
        let x = gen.forward(&z)?;
        let mut tape = Tape::new();
        let eb = enc.net.bind(&mut tape, true);
        let gb = gen.bind(&mut tape, false);
        let (zv, xv) = (tape.constant(&z), tape.constant(&x));
        let zh = enc.net.forward(&mut tape, &eb, xv)?;
        let lz = tape.l1(zh, zv)?;
        let xh = gen.apply(&mut tape, &gb, zh, 0, layers)?;
        let lx = tape.l1(xh, xv)?;
        let loss = tape.add(lz, lx)?;
        last = tape.scalar(loss);
        if !last.is_finite() {
            return Err(Error::Diverged { step: opt.steps() as usize, loss: last, initial: f32::NAN });
        }
        tape.backward(loss)?;
        enc.net.load_grads(&tape, &eb)?;
        opt.step(&mut enc.net.params_mut())?;
    }
    Ok(last)
}

/// Mean latent L1 and image L1 of an encoder on fresh generated samples.
pub fn validate_encoder(gen: &GeneratorNet, enc: &Encoder, n: usize, seed: u64) -> Result<(f32, f32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = latent_batch(&mut rng, n, gen.latent_dim())?;
    let x = gen.forward(&z)?;
    let zh = enc.encode(&x)?;
    let xh = gen.forward(&zh)?;
    let l1 = |a: &Tensor, b: &Tensor| {
        (a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.numel() as f64) as f32
    };
    Ok((l1(&z, &zh), l1(&x, &xh)))
}

/// The three encoders used by the inversion methods.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStack {
    /// Composition of the separately trained layer inverters.
    pub composed: Encoder,
    /// `composed` after joint fine-tuning.
    pub finetuned: Encoder,
    /// Same architecture trained end to end from scratch.
    pub direct: Encoder,
    pub reports: Vec<StageReport>,
}

impl EncoderStack {
    /// Trains `e_f`, then `e_n` down to `e_1`, composes and fine-tunes them,
    /// and trains the direct baseline.
    pub fn train(gen: &GeneratorNet, cfg: &EncoderTrainConfig) -> Result<Self> {
        let split = gen.split();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let specs = stage_specs(gen)?;
        let mut stages = Vec::new();
        let mut reports = Vec::new();
        for (k, spec) in specs.into_iter().enumerate() {
            let mut net = Network::init(spec, &mut rng)?;
            let (from, to, name) =
                if k == 0 { (split, gen.num_layers(), "e_f".to_string()) } else { (split - k, split - k + 1, format!("e_{}", split - k + 1)) };
            let seed = rng.random();
            let (l, r) = train_layer_inverter(gen, &mut net, from, to, cfg.layer_steps, cfg.layer_lr, cfg.lambda_r, cfg.batch, seed)?;
            log::info!("{name}: L_L {l:.4} L_R {r:.4}");
            reports.push(StageReport { name, steps: cfg.layer_steps, final_left: l, final_right: Some(r) });
            stages.push(net);
        }
        let composed = Encoder::compose(stages)?;
        let mut finetuned = composed.clone();
        let ft = train_end_to_end(gen, &mut finetuned, cfg.finetune_steps, cfg.finetune_lr, cfg.batch, rng.random())?;
        reports.push(StageReport { name: "finetune".into(), steps: cfg.finetune_steps, final_left: ft, final_right: None });
        let mut direct = Encoder::init(gen, rng.random())?;
        let dl = train_end_to_end(gen, &mut direct, cfg.direct_steps, cfg.direct_lr, cfg.batch, rng.random())?;
        reports.push(StageReport { name: "direct".into(), steps: cfg.direct_steps, final_left: dl, final_right: None });
        Ok(Self { composed, finetuned, direct, reports })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = EncoderMeta { stage_lengths: self.composed.stage_lengths.clone(), reports: self.reports.clone() };
        weights::encode(
            "encoder_stack",
            serde_json::to_value(meta)?,
            &[("composed", &self.composed.net), ("finetuned", &self.finetuned.net), ("direct", &self.direct.net)],
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, nets) = weights::decode(bytes, Some("encoder_stack"))?;
        let meta: EncoderMeta =
            serde_json::from_value(header.meta).map_err(|e| Error::Format(format!("bad encoder header: {e}")))?;
        let [composed, finetuned, direct]: [Network; 3] =
            nets.try_into().map_err(|_| Error::Format("encoder stack needs three networks".into()))?;
        let wrap = |net: Network| -> Result<Encoder> {
            if meta.stage_lengths.iter().sum::<usize>() != net.len() {
                return Err(Error::Format("stage lengths disagree with layer count".into()));
            }
            Ok(Encoder { net, stage_lengths: meta.stage_lengths.clone() })
        };
        Ok(Self { composed: wrap(composed)?, finetuned: wrap(finetuned)?, direct: wrap(direct)?, reports: meta.reports })
    }
}
