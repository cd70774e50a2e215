use serde::{Deserialize, Serialize};

use super::optim::{AdamConfig, MomentumConfig, OptimizerKind};
use super::schedule::Schedule;
use super::{Result, TrainError};
use crate::eval::FusionPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub adam: AdamConfig,
    pub momentum: MomentumConfig,
    pub schedule: Schedule,
    /// Multiplies exponential schedules; piecewise rates are absolute.
    pub base_lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a better selection index before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Share of each class held out for validation.
    pub val_fraction: f64,
    /// Checkpoints kept on disk and considered by selection.
    pub top_k: usize,
    /// Output index scored by the selection index.
    pub selection_class: usize,
    pub fusion_policy: FusionPolicy,
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Momentum,
            adam: AdamConfig::default(),
            momentum: MomentumConfig::default(),
            schedule: Schedule::piecewise(),
            base_lr: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 30,
            seed: 0,
            val_fraction: 0.1,
            top_k: 10,
            selection_class: 1,
            fusion_policy: FusionPolicy::Negative,
            eval_batch: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch size {} must be at least 2", self.batch_size));
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return bad(format!("base learning rate {} must be finite and non-negative", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.val_fraction));
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if self.eval_batch == 0 {
            return bad("eval batch must be positive".into());
        }
        Ok(())
    }
}
