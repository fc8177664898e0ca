//! Small fully connected networks with hand-written reverse-mode gradients,
//! their training losses, and the optimizer loop.

mod checkpoint;
mod classifier;
mod loss;
mod mlp;
mod params;
mod train;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use classifier::{loss_xent, train_classifier, Classifier, Labeled};
pub use loss::{loss_ddpm, loss_mse};
pub use mlp::{Dense, Mlp, MlpTrace, ParamSet};
pub use params::{timestep_features, NetParams, NetTrace, Objective, Topology};
pub use train::{
    clip_grad_norm, cosine_lr, ema_update, optimize, train, train_topology, write_loss_csv, LossPoint, NetworkShape, TrainConfig,
    TrainOutcome, DESK_LR_MULTIPLIER, REFERENCE_LR_START,
};

/// One training pair for a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example<T> {
    pub x: Vec<T>,
    pub condition: usize,
}
