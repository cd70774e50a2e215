//! Confusion matrices, positive-versus-rest metrics, subset evaluation,
//! gate capture and mean square deviation analysis.

mod confusion;
mod excitation;
mod finetune;
mod metrics;
mod msd;
mod report;
mod subset;

use crate::model::ModelError;
use crate::train::TrainError;

pub use confusion::{argmax_rows, confusion, predict_logits, stack_beats, ConfusionMatrix};
pub use excitation::{capture_excitations, default_sites, ExcitationTrace, SamplingNote, Site};
pub use finetune::{pair_confusion, segment_finetune_eval, FinetuneConfig, FinetuneResult};
pub use metrics::{
    binary_counts, binary_metrics, display_percent, fraction_to_f64, mcc, BinaryCounts, Fraction, FusionPolicy, MetricsReport,
};
pub use msd::{msd, msd_table, MsdRow, CLASS_PAIRS, MSD_SCALE};
pub use report::{
    confusion_csv, excitation_csv, metrics_csv, msd_csv, table4_text, write_atomic, write_json_atomic, METRICS_HEADER,
};
pub use subset::{filter_beats, Subset};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid evaluation request: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(Box<TrainError>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<TrainError> for EvalError {
    fn from(e: TrainError) -> Self {
        EvalError::Train(Box::new(e))
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;
