//! Feed-forward layer stacks shared by the generator, the encoders, the
//! critic and the feature extractor.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{kaiming_uniform, Tape, Tensor, Var};
use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    /// Flattens its input, then applies an affine map.
    Linear { inputs: usize, outputs: usize },
    Conv { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize },
    ConvTranspose { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    LeakyRelu { slope: f32 },
    Tanh,
}

impl Activation {
    pub const LEAKY: Activation = Activation::LeakyRelu { slope: 0.2 };
    pub const RELU: Activation = Activation::LeakyRelu { slope: 0.0 };

    fn init_slope(self) -> f32 {
        match self {
            Activation::LeakyRelu { slope } => slope,
            _ => 1.0,
        }
    }
}

/// A layer's operation together with its per-item input and output shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

fn spatial(input: &[usize], op: &'static str) -> Result<(usize, usize, usize)> {
    match *input {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(shape_err(op, format!("expected a [C, H, W] input, got {input:?}"))),
    }
}

impl LayerSpec {
    /// Linear layer whose output is reshaped to `output`.
    pub fn linear(input: &[usize], output: &[usize], activation: Activation) -> Self {
        let kind = LayerKind::Linear { inputs: input.iter().product(), outputs: output.iter().product() };
        Self { kind, activation, input: input.to_vec(), output: output.to_vec() }
    }

    pub fn conv(input: &[usize], out_channels: usize, kernel: usize, stride: usize, pad: usize, activation: Activation) -> Result<Self> {
        let (c, h, w) = spatial(input, "conv")?;
        if stride == 0 || kernel > h + 2 * pad || kernel > w + 2 * pad {
            return Err(shape_err("conv", format!("kernel {kernel}/stride {stride} does not fit {input:?}")));
        }
        let ho = (h + 2 * pad - kernel) / stride + 1;
        let wo = (w + 2 * pad - kernel) / stride + 1;
        Ok(Self {
            kind: LayerKind::Conv { in_channels: c, out_channels, kernel, stride, pad },
            activation,
            input: input.to_vec(),
            output: vec![out_channels, ho, wo],
        })
    }

    pub fn conv_transpose(
        input: &[usize],
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        activation: Activation,
    ) -> Result<Self> {
        let (c, h, w) = spatial(input, "conv_transpose")?;
        let grow = |n: usize| ((n - 1) * stride + kernel).checked_sub(2 * pad).filter(|&v| v > 0);
        let (Some(ho), Some(wo)) = (grow(h), grow(w)) else {
            return Err(shape_err("conv_transpose", format!("padding {pad} too large for {input:?}")));
        };
        if stride == 0 {
            return Err(shape_err("conv_transpose", "stride must be at least 1".to_string()));
        }
        Ok(Self {
            kind: LayerKind::ConvTranspose { in_channels: c, out_channels, kernel, stride, pad },
            activation,
            input: input.to_vec(),
            output: vec![out_channels, ho, wo],
        })
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Linear { inputs, outputs } => vec![inputs, outputs],
            LayerKind::Conv { in_channels, out_channels, kernel, .. } => vec![out_channels, in_channels, kernel, kernel],
            LayerKind::ConvTranspose { in_channels, out_channels, kernel, .. } => {
                vec![in_channels, out_channels, kernel, kernel]
            }
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Linear { outputs, .. } => outputs,
            LayerKind::Conv { out_channels, .. } | LayerKind::ConvTranspose { out_channels, .. } => out_channels,
        }
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Linear { inputs, .. } => inputs,
            LayerKind::Conv { in_channels, kernel, .. } => in_channels * kernel * kernel,
            LayerKind::ConvTranspose { in_channels, kernel, stride, .. } => {
                (in_channels * kernel * kernel / (stride * stride)).max(1)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            LayerKind::Linear { inputs, outputs } => {
                let ok = self.input.iter().product::<usize>() == inputs && self.output.iter().product::<usize>() == outputs;
                return if ok { Ok(()) } else { Err(shape_err("layer", format!("inconsistent linear spec {self:?}"))) };
            }
            LayerKind::Conv { out_channels, kernel, stride, pad, .. } => {
                Self::conv(&self.input, out_channels, kernel, stride, pad, self.activation)?
            }
            LayerKind::ConvTranspose { out_channels, kernel, stride, pad, .. } => {
                Self::conv_transpose(&self.input, out_channels, kernel, stride, pad, self.activation)?
            }
        };
        if expected != *self {
            return Err(shape_err("layer", format!("inconsistent spec {self:?}")));
        }
        Ok(())
    }
}

/// One layer and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Layer {
    pub fn init<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let weight = kaiming_uniform(spec.weight_shape(), spec.fan_in(), spec.activation.init_slope(), rng);
        let bias = Tensor::zeros([spec.bias_len()]);
        Ok(Self { spec, weight, bias })
    }

    pub fn from_parts(spec: LayerSpec, weight: Tensor, bias: Tensor) -> Result<Self> {
        spec.validate()?;
        if weight.shape() != spec.weight_shape() || bias.shape() != [spec.bias_len()] {
            return Err(shape_err(
                "layer",
                format!("weights {:?}/{:?} do not match spec {:?}", weight.shape(), bias.shape(), spec.kind),
            ));
        }
        Ok(Self { spec, weight, bias })
    }

    /// Applies the layer to a batch `x` of shape `[N, ..input]`.
    pub fn apply(&self, tape: &mut Tape, (w, b): (Var, Var), x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != self.spec.input.len() + 1 || shape[1..] != self.spec.input[..] {
            return Err(shape_err("layer", format!("input {:?} does not match {:?}", &shape, self.spec.input)));
        }
        let n = shape[0];
        let y = match self.spec.kind {
            LayerKind::Linear { inputs, .. } => {
                let flat = tape.reshape(x, &[n, inputs])?;
                let y = tape.linear(flat, w, Some(b))?;
                let mut out = vec![n];
                out.extend(&self.spec.output);
                tape.reshape(y, &out)?
            }
            LayerKind::Conv { stride, pad, .. } => tape.conv2d(x, w, Some(b), stride, pad)?,
            LayerKind::ConvTranspose { stride, pad, .. } => tape.conv_transpose2d(x, w, Some(b), stride, pad)?,
        };
        Ok(match self.spec.activation {
            Activation::Identity => y,
            Activation::LeakyRelu { slope } => tape.leaky_relu(y, slope),
            Activation::Tanh => tape.tanh(y),
        })
    }
}

/// Parameters of a network recorded on a tape.
#[derive(Clone, Debug)]
pub struct Bound(Vec<(Var, Var)>);

/// Ordered stack of layers, each consuming the previous layer's output.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].spec.output != pair[1].spec.input {
                return Err(shape_err(
                    "network",
                    format!("layer output {:?} feeds input {:?}", pair[0].spec.output, pair[1].spec.input),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn init<R: Rng + ?Sized>(specs: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        Self::new(specs.into_iter().map(|s| Layer::init(s, rng)).collect::<Result<_>>()?)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.layers[0].spec.input
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.layers[self.layers.len() - 1].spec.output
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.numel() + l.bias.numel()).sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    /// Records every parameter on `tape`, as trainable leaves or constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        Bound(self.layers.iter().map(|l| (tape.leaf(&l.weight, trainable), tape.leaf(&l.bias, trainable))).collect())
    }

    /// Runs layers `range` on `x`.
    pub fn forward_range(&self, tape: &mut Tape, bound: &Bound, x: Var, range: Range<usize>) -> Result<Var> {
        if range.end > self.layers.len() || range.start > range.end {
            return Err(Error::InvalidArgument(format!("layer range {range:?} outside 0..{}", self.layers.len())));
        }
        range.into_iter().try_fold(x, |h, i| self.layers[i].apply(tape, bound.0[i], h))
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        self.forward_range(tape, bound, x, 0..self.layers.len())
    }

    /// Evaluates layers `range` without recording gradients.
    pub fn infer_range(&self, x: &Tensor, range: Range<usize>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let xv = tape.constant(x);
        let y = self.forward_range(&mut tape, &bound, xv, range)?;
        Ok(tape.tensor(y))
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.infer_range(x, 0..self.layers.len())
    }

    /// Replaces each parameter's gradient with the one accumulated on `tape`.
    pub fn load_grads(&mut self, tape: &Tape, bound: &Bound) -> Result<()> {
        for (layer, &(w, b)) in self.layers.iter_mut().zip(&bound.0) {
            for (p, v) in [(&mut layer.weight, w), (&mut layer.bias, b)] {
                p.zero_grad();
                match tape.grad(v) {
                    Some(g) => p.accumulate_grad(g)?,
                    None => p.accumulate_grad(&vec![0.0; p.numel()])?,
                }
            }
        }
        Ok(())
    }
}
