use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::confusion::{argmax_rows, predict_logits, ConfusionMatrix};
use super::{EvalError, Result};
use crate::beats::Beat;
use crate::model::{truncate_and_head, HeadInit, Network};
use crate::train::{stratified_holdout, train_loop, LabeledBeats, TrainConfig, TrainOutcome};
use crate::wfdb::AamiClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub cut_block: usize,
    pub classes: [AamiClass; 2],
    pub head_init: HeadInit,
    /// Learning-rate multiplier of the kept segment relative to the head.
    pub segment_lr_scale: f32,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            cut_block: 2,
            classes: [AamiClass::V, AamiClass::F],
            head_init: HeadInit::Random,
            segment_lr_scale: 0.1,
            train: TrainConfig {
                max_epochs: 30,
                patience: 10,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneResult {
    pub cut_block: usize,
    pub classes: [AamiClass; 2],
    /// Beats of either class that the base model assigned to one of them.
    pub n_scored: usize,
    /// Base model decisions on those beats, 2x2.
    pub base: ConfusionMatrix,
    /// Pair model decisions on the same beats, 2x2.
    pub refined: ConfusionMatrix,
    pub training: TrainOutcome,
}

impl FinetuneResult {
    pub fn base_accuracy(&self) -> Option<f64> {
        accuracy(&self.base)
    }

    pub fn refined_accuracy(&self) -> Option<f64> {
        accuracy(&self.refined)
    }
}

fn accuracy(cm: &ConfusionMatrix) -> Option<f64> {
    (cm.total() > 0).then(|| cm.trace() as f64 / cm.total() as f64)
}

fn pair_index(classes: [AamiClass; 2], class: usize) -> Option<usize> {
    classes.iter().position(|c| c.index() == Some(class))
}

/// 2x2 confusion over the samples whose true and predicted classes (full
/// class indices) both lie in `classes`.
pub fn pair_confusion(classes: [AamiClass; 2], truth: &[usize], predicted: &[usize], subset_id: &str) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(EvalError::Shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
    }
    let mut cm = ConfusionMatrix::new(2, subset_id);
    for (&t, &p) in truth.iter().zip(predicted) {
        if let (Some(i), Some(j)) = (pair_index(classes, t), pair_index(classes, p)) {
            cm.add(i, j)?;
        }
    }
    Ok(cm)
}

/// Cuts `base` after `cut_block`, fine-tunes the pair model on the training
/// beats of the two classes and re-decides the test beats that the base
/// model already placed within the pair.
pub fn segment_finetune_eval(base: &Network, train: &[Beat], test: &[&Beat], cfg: &FinetuneConfig) -> Result<FinetuneResult> {
    if cfg.classes[0] == cfg.classes[1] || cfg.classes.iter().any(|c| c.index().is_none()) {
        return Err(EvalError::Config(format!("invalid class pair {:?}", cfg.classes)));
    }
    let mut model = truncate_and_head(base, cfg.cut_block, 2, &cfg.head_init, cfg.segment_lr_scale, cfg.seed)?;

    let pair_train: Vec<&Beat> = train.iter().filter(|b| cfg.classes.contains(&b.aami_class)).collect();
    let labels: Vec<usize> = pair_train.iter().map(|b| pair_index(cfg.classes, b.label()).unwrap()).collect();
    let all = LabeledBeats {
        beats: pair_train,
        labels,
    };
    if cfg.train.max_epochs > 0 && all.labels.iter().collect::<std::collections::BTreeSet<_>>().len() < 2 {
        return Err(EvalError::Config("fine-tuning needs training beats of both classes".into()));
    }
    let (tr, va) = stratified_holdout(&all.labels, cfg.train.val_fraction, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut tcfg = cfg.train.clone();
    tcfg.selection_class = tcfg.selection_class.min(1);
    let training = if all.is_empty() {
        return Err(EvalError::Config("no training beats of the selected classes".into()));
    } else {
        train_loop(&mut model, &all.select(&tr), &all.select(&va), &tcfg, None)?
    };

    let candidates: Vec<&Beat> = test.iter().copied().filter(|b| cfg.classes.contains(&b.aami_class)).collect();
    let base_pred = argmax_rows(&predict_logits(base, &candidates, tcfg.eval_batch)?, base.n_outputs());
    let scored: Vec<usize> = (0..candidates.len()).filter(|&i| pair_index(cfg.classes, base_pred[i]).is_some()).collect();
    let scored_beats: Vec<&Beat> = scored.iter().map(|&i| candidates[i]).collect();
    let truth: Vec<usize> = scored_beats.iter().map(|b| b.label()).collect();
    let base_sel: Vec<usize> = scored.iter().map(|&i| base_pred[i]).collect();
    let refined_pair = argmax_rows(&predict_logits(&model, &scored_beats, tcfg.eval_batch)?, 2);
    let refined_sel: Vec<usize> = refined_pair.iter().map(|&j| cfg.classes[j].index().unwrap()).collect();
    let id = format!("{}-{}", cfg.classes[0].symbol(), cfg.classes[1].symbol());
    Ok(FinetuneResult {
        cut_block: cfg.cut_block,
        classes: cfg.classes,
        n_scored: scored.len(),
        base: pair_confusion(cfg.classes, &truth, &base_sel, &id)?,
        refined: pair_confusion(cfg.classes, &truth, &refined_sel, &id)?,
        training,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::{LeadMode, Origin, Split, BEAT_LEN};
    use crate::model::{Attention, ModelSpec};
    use crate::train::{OptimizerKind, Schedule};

    fn beat(class: AamiClass, k: usize) -> Beat {
        let f = if class == AamiClass::V { 2.0 } else { 9.0 };
        Beat {
            record_id: "t".into(),
            r_index: k,
            n_leads: 1,
            leads: (0..BEAT_LEN).map(|t| (t as f32 / BEAT_LEN as f32 * f * 6.283 + k as f32).sin()).collect(),
            aami_class: class,
            split: Split::Train,
            origin: Origin::Natural,
        }
    }

    fn base() -> Network {
        Network::build(&ModelSpec {
            depth: 11,
            lead_mode: LeadMode::Mlii,
            attention: Attention::IseStandard,
            seed: 4,
            ..ModelSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn pair_confusion_keeps_pair_cells() {
        let cm = pair_confusion([AamiClass::V, AamiClass::F], &[2, 2, 3, 0, 3], &[2, 3, 2, 2, 0], "x").unwrap();
        assert_eq!(cm.counts, vec![1, 1, 1, 0]);
    }

    #[test]
    fn identity_head_without_training_matches_base() {
        let net = base();
        let beats: Vec<Beat> = (0..16).map(|k| beat(AamiClass::ALL[k % 4], k)).collect();
        let refs: Vec<&Beat> = beats.iter().collect();
        let cfg = FinetuneConfig {
            cut_block: net.n_blocks(),
            head_init: HeadInit::Identity { classes: vec![2, 3] },
            train: TrainConfig {
                max_epochs: 0,
                ..TrainConfig::default()
            },
            ..FinetuneConfig::default()
        };
        let r = segment_finetune_eval(&net, &beats, &refs, &cfg).unwrap();
        assert_eq!(r.base, r.refined);
    }

    #[test]
    fn separable_pair_does_not_get_worse() {
        let net = base();
        let train: Vec<Beat> = (0..24).map(|k| beat(if k % 2 == 0 { AamiClass::V } else { AamiClass::F }, k)).collect();
        let test: Vec<&Beat> = train.iter().collect();
        let cfg = FinetuneConfig {
            train: TrainConfig {
                optimizer: OptimizerKind::Adam,
                schedule: Schedule::Exponential { decay: 1.0 },
                base_lr: 1e-2,
                batch_size: 8,
                max_epochs: 6,
                val_fraction: 0.0,
                ..TrainConfig::default()
            },
            ..FinetuneConfig::default()
        };
        let r = segment_finetune_eval(&net, &train, &test, &cfg).unwrap();
        if let (Some(b), Some(f)) = (r.base_accuracy(), r.refined_accuracy()) {
            assert!(f >= b, "refined {f} < base {b}");
        }
    }
}
