//! Loss, optimizers, learning-rate schedules, the epoch loop, checkpoint
//! selection and parameter serialization.

mod checkpoint;
mod config;
mod holdout;
mod loss;
mod optim;
mod schedule;
mod select;
mod trainer;

use crate::autograd::AutogradError;
use crate::eval::EvalError;
use crate::model::ModelError;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest, TensorEntry};
pub use config::TrainConfig;
pub use holdout::stratified_holdout;
pub use loss::{add_l2_gradient, l2_penalty, loss};
pub use optim::{adam_step, momentum_step, AdamConfig, MomentumConfig, OptimizerKind, OptimizerState};
pub use schedule::{lr_at, Schedule};
pub use select::{select_checkpoint, selection_index};
pub use trainer::{train_loop, ClassMetrics, EpochRecord, LabeledBeats, TrainOutcome, ValMetrics, LOG_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite { epoch: usize, batch: usize, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
