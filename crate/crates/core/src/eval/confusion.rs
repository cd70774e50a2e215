use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::beats::{Beat, BEAT_LEN};
use crate::model::Network;

/// Counts indexed `(true class, predicted class)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    /// Row-major `n_classes x n_classes`.
    pub counts: Vec<u64>,
    pub subset_id: String,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize, subset_id: impl Into<String>) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
            subset_id: subset_id.into(),
        }
    }

    pub fn from_pairs(n_classes: usize, subset_id: impl Into<String>, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(EvalError::Shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
        }
        let mut cm = Self::new(n_classes, subset_id);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.n_classes || predicted >= self.n_classes {
            return Err(EvalError::Shape(format!("class ({truth}, {predicted}) outside 0..{}", self.n_classes)));
        }
        self.counts[truth * self.n_classes + predicted] += 1;
        Ok(())
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.n_classes).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_classes).map(|p| (0..self.n_classes).map(|t| self.get(t, p)).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, i)).sum()
    }
}

/// Index of the largest logit per row; the first of equal maxima wins.
pub fn argmax_rows(logits: &[f32], n: usize) -> Vec<usize> {
    logits
        .chunks(n)
        .map(|row| {
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Packs beats into the model input layout `[n, 512, n_leads]`.
pub fn stack_beats(beats: &[&Beat]) -> Vec<f32> {
    let mut x = Vec::with_capacity(beats.iter().map(|b| b.leads.len()).sum());
    for b in beats {
        x.extend_from_slice(&b.leads);
    }
    x
}

/// Logits of every beat, in order.
pub fn predict_logits(model: &Network, beats: &[&Beat], batch: usize) -> Result<Vec<f32>> {
    Ok(model.predict(&stack_beats(beats), BEAT_LEN, batch)?)
}

/// Confusion matrix of `model` over `beats` (true label from each beat's
/// class, prediction by arg-max).
pub fn confusion(model: &Network, beats: &[&Beat], subset_id: &str, batch: usize) -> Result<ConfusionMatrix> {
    let n = model.n_outputs();
    let preds = argmax_rows(&predict_logits(model, beats, batch)?, n);
    let truth: Vec<usize> = beats.iter().map(|b| b.label()).collect();
    ConfusionMatrix::from_pairs(n, subset_id, &truth, &preds)
}
