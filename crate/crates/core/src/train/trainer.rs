use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::config::TrainConfig;
use super::loss::{add_l2_gradient, loss};
use super::optim::OptimizerState;
use super::schedule::lr_at;
use super::select::{by_index, select_checkpoint, selection_index};
use super::{Result, TrainError};
use crate::autograd::Tensor;
use crate::beats::{Beat, BEAT_LEN};
use crate::eval::{argmax_rows, binary_metrics, predict_logits, BinaryCounts, ConfusionMatrix, MetricsReport};
use crate::model::{ForwardCtx, Network, ParamStore};
use crate::wfdb::AamiClass;

pub const LOG_HEADER: &str = "epoch,lr,train_loss,train_acc,val_acc,val_sen,val_ppr,val_mcc,index,kept";

/// Beats paired with the output index they should be classified as.
#[derive(Debug, Clone, Default)]
pub struct LabeledBeats<'a> {
    pub beats: Vec<&'a Beat>,
    pub labels: Vec<usize>,
}

impl<'a> LabeledBeats<'a> {
    /// Uses each beat's AAMI class index as its label.
    pub fn from_beats(beats: impl IntoIterator<Item = &'a Beat>) -> Self {
        let beats: Vec<&Beat> = beats.into_iter().collect();
        let labels = beats.iter().map(|b| b.label()).collect();
        LabeledBeats { beats, labels }
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> LabeledBeats<'a> {
        LabeledBeats {
            beats: idx.iter().map(|&i| self.beats[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub counts: BinaryCounts,
    pub sen: Option<f64>,
    pub spe: Option<f64>,
    pub ppr: Option<f64>,
    pub mcc: Option<f64>,
}

impl ClassMetrics {
    fn from_report(class: usize, r: &MetricsReport) -> Self {
        ClassMetrics {
            class,
            counts: r.counts,
            sen: r.sen_f64(),
            spe: r.spe_f64(),
            ppr: r.ppr_f64(),
            mcc: r.mcc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub n: usize,
    pub accuracy: Option<f64>,
    pub classes: Vec<ClassMetrics>,
    pub selection_class: usize,
    pub index: f64,
}

impl ValMetrics {
    pub fn selection(&self) -> &ClassMetrics {
        &self.classes[self.selection_class]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean objective over training batches; absent for epoch 0.
    pub train_loss: Option<f64>,
    pub train_acc: Option<f64>,
    pub val: Option<ValMetrics>,
    pub index: f64,
    /// Whether the epoch entered the retained top-k.
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub stopped_early: bool,
}

fn val_metrics(net: &Network, val: &LabeledBeats, cfg: &TrainConfig) -> Result<ValMetrics> {
    let n_out = net.n_outputs();
    let preds = argmax_rows(&predict_logits(net, &val.beats, cfg.eval_batch)?, n_out);
    let cm = ConfusionMatrix::from_pairs(n_out, "validation", &val.labels, &preds)?;
    let classes: Vec<ClassMetrics> = (0..n_out)
        .map(|c| {
            let report = match (n_out, AamiClass::from_index(c)) {
                (5, Some(class)) => binary_metrics(&cm, class, cfg.fusion_policy),
                _ => one_vs_rest(&cm, c),
            };
            ClassMetrics::from_report(c, &report)
        })
        .collect();
    let sel = &classes[cfg.selection_class];
    let index = selection_index(sel.sen, sel.ppr);
    Ok(ValMetrics {
        n: val.len(),
        accuracy: (cm.total() > 0).then(|| cm.trace() as f64 / cm.total() as f64),
        classes,
        selection_class: cfg.selection_class,
        index,
    })
}

fn one_vs_rest(cm: &ConfusionMatrix, pos: usize) -> MetricsReport {
    let mut c = BinaryCounts::default();
    for t in 0..cm.n_classes {
        for p in 0..cm.n_classes {
            let n = cm.get(t, p);
            match (t == pos, p == pos) {
                (true, true) => c.tp += n,
                (true, false) => c.fn_ += n,
                (false, true) => c.fp += n,
                (false, false) => c.tn += n,
            }
        }
    }
    let class = AamiClass::from_index(pos).unwrap_or(AamiClass::N);
    MetricsReport::from_counts(class, &cm.subset_id, Default::default(), c)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

fn write_log(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut text = String::from(LOG_HEADER);
    text.push('\n');
    for r in history.iter().filter(|r| r.epoch >= 1) {
        let sel = r.val.as_ref().map(|v| v.selection());
        text.push_str(&format!(
            "{},{:e},{},{},{},{},{},{},{:.6},{}\n",
            r.epoch,
            r.lr,
            opt_cell(r.train_loss),
            opt_cell(r.train_acc),
            opt_cell(r.val.as_ref().and_then(|v| v.accuracy)),
            opt_cell(sel.and_then(|s| s.sen)),
            opt_cell(sel.and_then(|s| s.ppr)),
            opt_cell(sel.and_then(|s| s.mcc)),
            r.index,
            r.kept
        ));
    }
    crate::eval::write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn checkpoint_dir(out: &Path, epoch: usize) -> std::path::PathBuf {
    out.join("checkpoints").join(format!("epoch_{epoch:04}"))
}

struct Retained {
    epoch: usize,
    index: f64,
    mcc: Option<f64>,
    params: ParamStore,
}

/// Trains `net` on `train`, scoring `val` after every epoch (epoch 0 is the
/// initial state). The `top_k` epochs by selection index are retained, on
/// disk under `out/checkpoints` when `out` is given, and `net` is left at
/// the epoch chosen by [`select_checkpoint`].
pub fn train_loop(
    net: &mut Network,
    train: &LabeledBeats,
    val: &LabeledBeats,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n_out = net.n_outputs();
    if train.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    if cfg.selection_class >= n_out {
        return Err(TrainError::Config(format!("selection class {} outside 0..{n_out}", cfg.selection_class)));
    }
    let n_leads = net.spec.lead_mode.n_leads();
    for set in [train, val] {
        if let Some(&l) = set.labels.iter().find(|&&l| l >= n_out) {
            return Err(TrainError::Config(format!("label {l} outside 0..{n_out}")));
        }
        if let Some(b) = set.beats.iter().find(|b| b.n_leads != n_leads || b.leads.len() != BEAT_LEN * n_leads) {
            return Err(TrainError::Config(format!(
                "beat {}:{} has {} leads, model expects {n_leads}",
                b.record_id, b.r_index, b.n_leads
            )));
        }
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
    }

    let lambda = net.spec.l2_lambda;
    let mut optimizer = OptimizerState::new(cfg.optimizer, cfg.adam, cfg.momentum, &net.params);
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut retained: Vec<Retained> = Vec::new();
    let mut best_index = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut stopped_early = false;
    let per = BEAT_LEN * n_leads;

    for epoch in 0..=cfg.max_epochs {
        let lr = lr_at(&cfg.schedule, epoch.saturating_sub(1), cfg.base_lr);
        let (mut train_loss, mut train_acc) = (None, None);
        if epoch > 0 {
            let mut order: Vec<usize> = (0..train.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(epoch as u64);
            order.shuffle(&mut rng);
            let mut bounds: Vec<(usize, usize)> =
                (0..order.len()).step_by(cfg.batch_size).map(|s| (s, (s + cfg.batch_size).min(order.len()))).collect();
            // a one-sample tail has no batch statistics; fold it into the previous batch
            if bounds.len() > 1 && bounds.last().is_some_and(|&(s, e)| e - s < 2) {
                let (_, e) = bounds.pop().unwrap();
                bounds.last_mut().unwrap().1 = e;
            }
            let (mut loss_sum, mut correct) = (0.0, 0usize);
            for (batch_id, &(s, e)) in bounds.iter().enumerate() {
                let idx = &order[s..e];
                let mut x = Vec::with_capacity(idx.len() * per);
                for &i in idx {
                    x.extend_from_slice(&train.beats[i].leads);
                }
                let labels: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
                let input = Tensor::new(&[idx.len(), 1, BEAT_LEN, n_leads], x);
                let mut ctx = ForwardCtx::<f32>::train();
                let logits = net.forward(&input, &mut ctx)?;
                let (ce, total) = loss(&logits, &labels, &net.params, lambda)?;
                ce.backward();
                let mut grads = ctx.gradients();
                let finite = total.is_finite() && grads.iter().all(|(_, g)| g.iter().all(|v| v.is_finite()));
                if !finite {
                    let detail = format!("objective {total}");
                    if let Some(out) = out {
                        let beats: Vec<String> = idx.iter().map(|&i| format!("{}:{}", train.beats[i].record_id, train.beats[i].r_index)).collect();
                        let dump = serde_json::json!({ "epoch": epoch, "batch": batch_id, "objective": total.to_string(), "beats": beats });
                        crate::eval::write_json_atomic(&out.join("nonfinite.json"), &dump)?;
                    }
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: batch_id,
                        detail,
                    });
                }
                add_l2_gradient(&net.params, &mut grads, lambda);
                optimizer.apply(&mut net.params, &grads, lr)?;
                net.apply_bn_updates(&ctx);
                loss_sum += total * idx.len() as f64;
                correct += argmax_rows(logits.data(), n_out).iter().zip(&labels).filter(|(p, l)| p == l).count();
            }
            train_loss = Some(loss_sum / train.len() as f64);
            train_acc = Some(correct as f64 / train.len() as f64);
        }

        let val_m = if val.is_empty() { None } else { Some(val_metrics(net, val, cfg)?) };
        let index = val_m.as_ref().map_or(0.0, |v| v.index);
        let mcc = val_m.as_ref().and_then(|v| v.selection().mcc);

        retained.push(Retained {
            epoch,
            index,
            mcc,
            params: net.params.clone(),
        });
        retained.sort_by(|a, b| by_index(&(a.epoch, a.index), &(b.epoch, b.index)));
        let dropped: Vec<Retained> = if retained.len() > cfg.top_k { retained.split_off(cfg.top_k) } else { Vec::new() };
        let kept = retained.iter().any(|r| r.epoch == epoch);
        if let Some(out) = out {
            for d in &dropped {
                let dir = checkpoint_dir(out, d.epoch);
                if dir.exists() {
                    fs::remove_dir_all(dir)?;
                }
            }
            if kept {
                save_checkpoint(&checkpoint_dir(out, epoch), net, Some(&optimizer), epoch, val_m.as_ref())?;
            }
        }

        let record = EpochRecord {
            epoch,
            lr,
            train_loss,
            train_acc,
            val: val_m,
            index,
            kept,
        };
        log::info!(
            "epoch {epoch}: lr {lr:e} loss {} acc {} index {index:.4}",
            opt_cell(record.train_loss),
            opt_cell(record.train_acc)
        );
        history.push(record);
        if let Some(out) = out {
            write_log(&out.join("train_log.csv"), &history)?;
        }

        if index > best_index {
            best_index = index;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience && epoch < cfg.max_epochs {
                stopped_early = true;
                break;
            }
        }
    }

    let candidates: Vec<(usize, f64, Option<f64>)> = retained.iter().map(|r| (r.epoch, r.index, r.mcc)).collect();
    let selected_epoch = select_checkpoint(&candidates, cfg.top_k).expect("epoch 0 is always a candidate");
    net.params = retained.into_iter().find(|r| r.epoch == selected_epoch).expect("selected epoch is retained").params;
    let outcome = TrainOutcome {
        history,
        selected_epoch,
        stopped_early,
    };
    if let Some(out) = out {
        let selected = serde_json::json!({
            "epoch": selected_epoch,
            "checkpoint": format!("checkpoints/epoch_{selected_epoch:04}"),
            "stopped_early": stopped_early,
        });
        crate::eval::write_json_atomic(&out.join("selected.json"), &selected)?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::{LeadMode, Origin, Split};
    use crate::model::{Attention, ModelSpec};
    use crate::train::Schedule;

    fn beat(class: AamiClass, k: usize) -> Beat {
        let leads: Vec<f32> = (0..BEAT_LEN)
            .map(|t| {
                let x = t as f32 / BEAT_LEN as f32;
                let f = 1.0 + class.index().unwrap() as f32 * 3.0;
                (f * x * 6.283 + k as f32 * 0.1).sin()
            })
            .collect();
        Beat {
            record_id: "t".into(),
            r_index: k,
            n_leads: 1,
            leads,
            aami_class: class,
            split: Split::Train,
            origin: Origin::Natural,
        }
    }

    fn model() -> Network {
        Network::build(&ModelSpec {
            depth: 11,
            lead_mode: LeadMode::Mlii,
            attention: Attention::IseStandard,
            ..ModelSpec::default()
        })
        .unwrap()
    }

    fn data() -> Vec<Beat> {
        (0..12).map(|k| beat(AamiClass::ALL[k % 4], k)).collect()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            optimizer: crate::train::OptimizerKind::Adam,
            schedule: Schedule::Exponential { decay: 1.0 },
            base_lr: 1e-2,
            batch_size: 4,
            max_epochs: epochs,
            top_k: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_lr_keeps_trainable_parameters() {
        let beats = data();
        let set = LabeledBeats::from_beats(&beats);
        let mut net = model();
        let before = net.params.clone();
        let mut c = cfg(2);
        c.base_lr = 0.0;
        train_loop(&mut net, &set, &set, &c, None).unwrap();
        for (a, b) in before.iter().zip(net.params.iter()).filter(|(a, _)| a.trainable) {
            assert_eq!(a.values, b.values, "{}", a.name);
        }
    }

    #[test]
    fn zero_epochs_keeps_initial_checkpoint_only() {
        let beats = data();
        let set = LabeledBeats::from_beats(&beats);
        let dir = tempfile::tempdir().unwrap();
        let mut net = model();
        let out = train_loop(&mut net, &set, &set, &cfg(0), Some(dir.path())).unwrap();
        assert_eq!(out.selected_epoch, 0);
        assert!(dir.path().join("checkpoints/epoch_0000/params.bin").is_file());
        let log = fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
        assert_eq!(log.trim(), LOG_HEADER);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let beats = data();
        let set = LabeledBeats::from_beats(&beats);
        let dir = tempfile::tempdir().unwrap();
        let run = |out: Option<&Path>| {
            let mut net = model();
            let o = train_loop(&mut net, &set, &set, &cfg(4), out).unwrap();
            (o, net)
        };
        let (a, net_a) = run(Some(dir.path()));
        let (b, net_b) = run(None);
        assert_eq!(a.history.iter().map(|r| r.train_loss).collect::<Vec<_>>(), b.history.iter().map(|r| r.train_loss).collect::<Vec<_>>());
        assert_eq!(net_a.params.iter().map(|p| p.values.clone()).collect::<Vec<_>>(), net_b.params.iter().map(|p| p.values.clone()).collect::<Vec<_>>());
        let losses: Vec<f64> = a.history.iter().filter_map(|r| r.train_loss).collect();
        assert!(losses.last().unwrap() < losses.first().unwrap(), "{losses:?}");
        let kept = fs::read_dir(dir.path().join("checkpoints")).unwrap().count();
        assert_eq!(kept, 2);
        let sel = crate::train::load_checkpoint(&checkpoint_dir(dir.path(), a.selected_epoch)).unwrap();
        for p in net_a.params.iter() {
            assert_eq!(p.values, sel.network.params.by_name(&p.name).unwrap().values);
        }
    }

    #[test]
    fn non_finite_input_aborts_with_batch_id() {
        let mut beats = data();
        beats[3].leads[10] = f32::NAN;
        let set = LabeledBeats::from_beats(&beats);
        let dir = tempfile::tempdir().unwrap();
        let err = train_loop(&mut model(), &set, &LabeledBeats::default(), &cfg(1), Some(dir.path())).unwrap_err();
        assert!(matches!(err, TrainError::NonFinite { epoch: 1, .. }), "{err}");
        assert!(dir.path().join("nonfinite.json").is_file());
    }
}
