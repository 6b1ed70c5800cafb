//! Layer-wise generator inversion: per-layer inverters, the composed and
//! fine-tuned encoder, perturbation-based image optimisation and the
//! baseline methods it is compared against.

mod correlation;
mod encoder;
mod loss;
mod methods;
mod optim;

pub use correlation::{pooled_correlation, Correlation, CorrelationSummary};
pub use encoder::{
    head_inverter_specs, inversion_losses, layer_inverter_specs, stage_specs, train_end_to_end, train_layer_inverter,
    validate_encoder, Encoder, EncoderStack, EncoderTrainConfig, StageReport, LAMBDA_R,
};
pub use loss::{ImageLoss, LossSpec};
pub use methods::{correlation_summary, GroundTruth, InversionConfig, InversionResult, Inverter, Method, LAMBDA_REG};
pub use optim::{minimize, OptimConfig};
