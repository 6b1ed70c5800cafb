use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::nn::{Activation, Bound, LayerSpec, Network};

/// Image distance `ℓ`: pixel L1 plus squared distance between features of a
/// frozen random convolutional network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub pixel_weight: f32,
    pub feature_weight: f32,
    pub feature_seed: u64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self { pixel_weight: 1.0, feature_weight: 1.0, feature_seed: 99 }
    }
}

/// Frozen feature extractor plus the weights of `ℓ`.
#[derive(Clone, Debug)]
pub struct ImageLoss {
    spec: LossSpec,
    features: Network,
}

impl ImageLoss {
    pub fn new(spec: LossSpec, image_shape: &[usize]) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.feature_seed);
        let c1 = LayerSpec::conv(image_shape, 8, 3, 1, 1, Activation::RELU)?;
        let c2 = LayerSpec::conv(&c1.output, 16, 4, 2, 1, Activation::RELU)?;
        let c3 = LayerSpec::conv(&c2.output, 16, 4, 2, 1, Activation::Identity)?;
        let features = Network::init(vec![c1, c2, c3], &mut rng)?;
        Ok(Self { spec, features })
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        self.features.infer(x)
    }

    /// Records the frozen feature network on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        self.features.bind(tape, false)
    }

    /// `ℓ(target, y)`, with the target's features precomputed.
    pub fn record(&self, tape: &mut Tape, bound: &Bound, target: Var, target_features: Var, y: Var) -> Result<Var> {
        let pix = tape.l1(y, target)?;
        let fy = self.features.forward(tape, bound, y)?;
        let feat = tape.mse(fy, target_features)?;
        let a = tape.scale(pix, self.spec.pixel_weight);
        let b = tape.scale(feat, self.spec.feature_weight);
        tape.add(a, b)
    }

    /// Plain evaluation of `ℓ(a, b)`.
    pub fn value(&self, a: &Tensor, b: &Tensor) -> Result<f32> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let av = tape.constant(a);
        let fa = self.features.forward(&mut tape, &bound, av)?;
        let bv = tape.constant(b);
        let l = self.record(&mut tape, &bound, av, fa, bv)?;
        Ok(tape.scalar(l))
    }
}
