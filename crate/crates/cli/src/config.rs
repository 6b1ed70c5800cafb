use std::path::{Path, PathBuf};

use ganscope::generator::{TrainConfig, TrainMode, DEFAULT_LATENT_DIM, DEFAULT_SPLIT};
use ganscope::inversion::{EncoderTrainConfig, InversionConfig, LossSpec, Method, OptimConfig, LAMBDA_R, LAMBDA_REG};
use ganscope::scene::{ClassInventory, DEFAULT_CANVAS};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run needs. Stage seeds are derived from `seed` and are not
/// configurable separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed.
    pub seed: u64,
    /// Run directory.
    pub out: PathBuf,
    /// JSON class inventory; the built-in eight classes when absent.
    pub inventory: Option<PathBuf>,
    /// Class id left out of the generator's training data.
    pub withheld: Option<u8>,
    pub canvas: usize,
    pub data: DataSection,
    pub generator: GeneratorSection,
    pub encoder: EncoderSection,
    pub inversion: InversionSection,
    pub stats: StatsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train: usize,
    pub truth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub latent_dim: usize,
    pub split: usize,
    pub mode: TrainMode,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub critic_lr: f64,
    pub anneal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub layer_steps: usize,
    pub layer_lr: f64,
    pub finetune_steps: usize,
    pub finetune_lr: f64,
    pub direct_steps: usize,
    pub direct_lr: f64,
    pub batch: usize,
    pub lambda_r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSection {
    pub method: Method,
    /// Real images containing the withheld class to invert.
    pub count: usize,
    pub lambda_reg: f64,
    pub lr: f64,
    pub steps: usize,
    pub patience: usize,
    pub pixel_weight: f64,
    pub feature_weight: f64,
    pub feature_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    /// Generated samples, and samples per split for the noise floor.
    pub samples: usize,
    pub top_k: usize,
    /// Bars above this are drawn clipped.
    pub clip_ceiling: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("run"),
            inventory: None,
            withheld: Some(4),
            canvas: DEFAULT_CANVAS,
            data: DataSection::default(),
            generator: GeneratorSection::default(),
            encoder: EncoderSection::default(),
            inversion: InversionSection::default(),
            stats: StatsSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self { train: 10_000, truth: 10_000 }
    }
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            latent_dim: DEFAULT_LATENT_DIM,
            split: DEFAULT_SPLIT,
            mode: t.mode,
            steps: t.steps,
            batch: t.batch,
            lr: 0.002,
            beta1: 0.5,
            beta2: 0.999,
            critic_lr: 0.0002,
            anneal: t.anneal,
        }
    }
}

impl Default for EncoderSection {
    fn default() -> Self {
        let e = EncoderTrainConfig::default();
        Self {
            layer_steps: e.layer_steps,
            layer_lr: 0.001,
            finetune_steps: e.finetune_steps,
            finetune_lr: 0.0001,
            direct_steps: e.direct_steps,
            direct_lr: 0.001,
            batch: e.batch,
            lambda_r: LAMBDA_R as f64,
        }
    }
}

impl Default for InversionSection {
    fn default() -> Self {
        let o = OptimConfig::default();
        let l = LossSpec::default();
        Self {
            method: Method::F,
            count: 8,
            lambda_reg: LAMBDA_REG as f64,
            lr: 0.05,
            steps: o.steps,
            patience: o.patience,
            pixel_weight: l.pixel_weight as f64,
            feature_weight: l.feature_weight as f64,
            feature_seed: l.feature_seed,
        }
    }
}

impl Default for StatsSection {
    fn default() -> Self {
        Self { samples: 10_000, top_k: 8, clip_ceiling: 400.0 }
    }
}

/// Per-stage seeds fanned out from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub train_data: u64,
    pub truth_data: u64,
    pub generator_init: u64,
    pub generator_train: u64,
    pub encoder: u64,
    pub generated_stats: u64,
    pub sensitivity: u64,
    pub inversion: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        let s = |k| ganscope::scene::item_seed(seed, k);
        Self {
            train_data: s(1),
            truth_data: s(2),
            generator_init: s(3),
            generator_train: s(4),
            encoder: s(5),
            generated_stats: s(6),
            sensitivity: s(7),
            inversion: s(8),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(format!("config: {m}")));
        if self.canvas < 8 || self.canvas % 8 != 0 {
            return bad("canvas must be a positive multiple of 8");
        }
        if self.generator.steps == 0 || self.generator.batch == 0 {
            return bad("generator steps and batch must be ≥ 1");
        }
        if self.inversion.steps == 0 || self.inversion.lambda_reg < 0.0 || self.encoder.lambda_r < 0.0 {
            return bad("inversion steps must be ≥ 1 and λ weights ≥ 0");
        }
        if self.stats.samples < 2 || self.data.truth < 2 {
            return bad("statistics need at least two samples");
        }
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.seed)
    }

    pub fn load_inventory(&self) -> Result<ClassInventory, CliError> {
        let inv = match &self.inventory {
            None => ClassInventory::default(),
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| CliError::Data(format!("cannot read inventory {}: {e}", p.display())))?;
                let raw: ClassInventory =
                    serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("inventory {}: {e}", p.display())))?;
                ClassInventory::new(raw.classes().to_vec())?
            }
        };
        if let Some(id) = self.withheld {
            if inv.get(id).is_none() {
                return Err(CliError::Usage(format!("config: withheld class {id} is not in the inventory")));
            }
        }
        Ok(inv)
    }

    pub fn train_config(&self) -> TrainConfig {
        let g = &self.generator;
        TrainConfig {
            mode: g.mode,
            steps: g.steps,
            batch: g.batch,
            lr: g.lr as f32,
            beta1: g.beta1 as f32,
            beta2: g.beta2 as f32,
            critic_lr: g.critic_lr as f32,
            anneal: g.anneal,
            seed: self.seeds().generator_train,
        }
    }

    pub fn encoder_config(&self) -> EncoderTrainConfig {
        let e = &self.encoder;
        EncoderTrainConfig {
            layer_steps: e.layer_steps,
            layer_lr: e.layer_lr as f32,
            finetune_steps: e.finetune_steps,
            finetune_lr: e.finetune_lr as f32,
            direct_steps: e.direct_steps,
            direct_lr: e.direct_lr as f32,
            batch: e.batch,
            lambda_r: e.lambda_r as f32,
            seed: self.seeds().encoder,
        }
    }

    pub fn inversion_config(&self) -> InversionConfig {
        let i = &self.inversion;
        InversionConfig {
            lambda_reg: i.lambda_reg as f32,
            optim: OptimConfig { lr: i.lr as f32, steps: i.steps, patience: i.patience, ..OptimConfig::default() },
            loss: LossSpec { pixel_weight: i.pixel_weight as f32, feature_weight: i.feature_weight as f32, feature_seed: i.feature_seed },
        }
    }
}
