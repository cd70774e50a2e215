use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{denoise, DenoiseConfig};
use super::normalize::normalize_lead;
use super::records::{exclude_records, DS1, DS2, DS2S, DS2V};
use super::resample::{resample_to_512, Resampled, BEAT_LEN};
use super::segment::segment_beats;
use super::{Beat, BeatsError, LeadMode, Origin, Result, Split};
use crate::wfdb::{load_record, RawRecord};

/// Beats whose R-peak falls before this sample (5 min at 360 Hz) form the
/// training split.
pub const TRAIN_WINDOW_SAMPLES: usize = 300 * 360;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiseScope {
    /// Filter each full lead once, then cut beats.
    Record,
    /// Cut beats, then filter each window on its own.
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub lead_mode: LeadMode,
    pub seed: u64,
    /// Inclusive window length bounds in samples; beats outside are dropped.
    pub min_len: usize,
    pub max_len: usize,
    pub train_window_samples: usize,
    pub denoise: DenoiseConfig,
    pub denoise_scope: DenoiseScope,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            lead_mode: LeadMode::Both,
            seed: 0,
            min_len: 128,
            max_len: 1024,
            train_window_samples: TRAIN_WINDOW_SAMPLES,
            denoise: DenoiseConfig::default(),
            denoise_scope: DenoiseScope::Record,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordStats {
    pub record_id: String,
    pub train: [usize; 5],
    pub test: [usize; 5],
    pub rejected: [usize; 5],
    /// Windows too short to filter, kept unfiltered.
    pub unfiltered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub ds1_records: Vec<String>,
    pub ds2_records: Vec<String>,
    pub ds2v_records: Vec<String>,
    pub ds2s_records: Vec<String>,
    pub train_window_samples: usize,
    pub lead_mode: LeadMode,
    pub beats_train: Vec<Beat>,
    pub beats_test: Vec<Beat>,
    pub record_stats: Vec<RecordStats>,
}

impl DatasetSplit {
    pub fn train_counts(&self) -> [usize; 5] {
        class_counts(&self.beats_train)
    }

    pub fn test_counts(&self) -> [usize; 5] {
        class_counts(&self.beats_test)
    }

    pub fn rejected_counts(&self) -> [usize; 5] {
        let mut out = [0; 5];
        for s in &self.record_stats {
            for (o, r) in out.iter_mut().zip(s.rejected) {
                *o += r;
            }
        }
        out
    }
}

/// Per-class counts in `AamiClass::ALL` order.
pub fn class_counts(beats: &[Beat]) -> [usize; 5] {
    let mut c = [0; 5];
    for b in beats {
        c[b.label()] += 1;
    }
    c
}

fn stream_id(record_id: &str) -> u64 {
    // FNV-1a: stable across platforms and releases
    record_id
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Record signal indices for MLII and V1, falling back to positions 0 and 1.
fn lead_positions(record: &RawRecord) -> [usize; 2] {
    let names = record.header.lead_names();
    let find = |want: &str, default: usize| names.iter().position(|n| n.eq_ignore_ascii_case(want)).unwrap_or(default);
    let pos = [find("MLII", 0), find("V1", 1)];
    if pos[0] == pos[1] {
        [0, 1]
    } else {
        pos
    }
}

/// Segments, filters, resamples and normalizes the beats of one record.
pub fn process_record(record: &RawRecord, cfg: &PrepareConfig) -> Result<(Vec<Beat>, RecordStats)> {
    if cfg.min_len > cfg.max_len {
        return Err(BeatsError::Config(format!("min_len {} exceeds max_len {}", cfg.min_len, cfg.max_len)));
    }
    let positions = lead_positions(record);
    let channels: Vec<usize> = cfg.lead_mode.channels().iter().map(|&c| positions[c]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream_id(record.record_id()));

    let mut stats = RecordStats {
        record_id: record.record_id().to_string(),
        ..RecordStats::default()
    };
    let full: Vec<Vec<f64>> = channels
        .iter()
        .map(|&c| {
            let x: Vec<f64> = record.signals[c].iter().map(|v| f64::from(*v)).collect();
            match cfg.denoise_scope {
                DenoiseScope::Record => denoise(&x, &cfg.denoise).values,
                DenoiseScope::Window => x,
            }
        })
        .collect();

    let mut beats = Vec::new();
    for w in segment_beats(record) {
        let class_idx = w.aami_class.index().expect("segment_beats drops Excluded");
        let mut windows: Vec<Vec<f64>> = full.iter().map(|l| l[w.start..=w.end].to_vec()).collect();
        if cfg.denoise_scope == DenoiseScope::Window {
            for win in &mut windows {
                let d = denoise(win, &cfg.denoise);
                stats.unfiltered += usize::from(d.passthrough);
                *win = d.values;
            }
        }
        let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
        let leads = match resample_to_512(&refs, (cfg.min_len, cfg.max_len), &mut rng) {
            Resampled::Beat(l) => l,
            Resampled::Rejected { .. } => {
                stats.rejected[class_idx] += 1;
                continue;
            }
        };
        let leads: Vec<Vec<f64>> = leads.iter().map(|l| normalize_lead(l)).collect();
        let n_leads = leads.len();
        let mut flat = vec![0f32; BEAT_LEN * n_leads];
        for (c, l) in leads.iter().enumerate() {
            for (t, v) in l.iter().enumerate() {
                flat[t * n_leads + c] = *v as f32;
            }
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(BeatsError::Data(format!(
                "record {} beat at {} produced non-finite values",
                record.record_id(),
                w.r_index
            )));
        }
        let split = if w.r_index < cfg.train_window_samples { Split::Train } else { Split::Test };
        match split {
            Split::Train => stats.train[class_idx] += 1,
            Split::Test => stats.test[class_idx] += 1,
        }
        beats.push(Beat {
            record_id: record.record_id().to_string(),
            r_index: w.r_index,
            n_leads,
            leads: flat,
            aami_class: w.aami_class,
            split,
            origin: Origin::Natural,
        });
    }
    let rejected: usize = stats.rejected.iter().sum();
    if rejected > 0 {
        log::info!("record {}: rejected {rejected} beats outside [{}, {}] samples", stats.record_id, cfg.min_len, cfg.max_len);
    }
    Ok((beats, stats))
}

fn assemble(mut results: Vec<(Vec<Beat>, RecordStats)>, cfg: &PrepareConfig) -> DatasetSplit {
    results.sort_by(|a, b| a.1.record_id.cmp(&b.1.record_id));
    let present: BTreeSet<&str> = results.iter().map(|r| r.1.record_id.as_str()).collect();
    let pick = |list: &[&str]| list.iter().filter(|r| present.contains(*r)).map(|r| r.to_string()).collect();
    let mut split = DatasetSplit {
        ds1_records: pick(&DS1),
        ds2_records: pick(&DS2),
        ds2v_records: pick(&DS2V),
        ds2s_records: pick(&DS2S),
        train_window_samples: cfg.train_window_samples,
        lead_mode: cfg.lead_mode,
        beats_train: Vec::new(),
        beats_test: Vec::new(),
        record_stats: Vec::new(),
    };
    for (beats, stats) in results {
        for b in beats {
            match b.split {
                Split::Train => split.beats_train.push(b),
                Split::Test => split.beats_test.push(b),
            }
        }
        split.record_stats.push(stats);
    }
    split
}

fn retained(ids: impl IntoIterator<Item = String>) -> Vec<String> {
    let ids: Vec<String> = ids.into_iter().collect();
    let keep = exclude_records(ids.iter().map(String::as_str));
    for id in &ids {
        if !keep.contains(id) {
            log::info!("record {id} is excluded from datasets");
        }
    }
    ids.into_iter().filter(|id| keep.contains(id)).collect()
}

/// Builds train/test beats from loaded records. Excluded records are
/// skipped.
pub fn build_splits(records: &[RawRecord], cfg: &PrepareConfig) -> Result<DatasetSplit> {
    let keep: BTreeSet<String> = retained(records.iter().map(|r| r.record_id().to_string())).into_iter().collect();
    let results = records
        .par_iter()
        .filter(|r| keep.contains(r.record_id()))
        .map(|r| process_record(r, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(results, cfg))
}

/// Like [`build_splits`] but loads records from `dir` one at a time so at
/// most one raw record per worker thread is held in memory. Every listed
/// record must be present.
pub fn build_splits_from_dir(dir: &Path, record_ids: &[String], cfg: &PrepareConfig) -> Result<DatasetSplit> {
    let ids = retained(record_ids.iter().cloned());
    let missing: Vec<&str> = ids
        .iter()
        .filter(|id| !dir.join(format!("{id}.hea")).is_file() || !dir.join(format!("{id}.atr")).is_file())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(BeatsError::Data(format!("missing records in {}: {}", dir.display(), missing.join(", "))));
    }
    let results = ids
        .par_iter()
        .map(|id| {
            let record = load_record(dir, id)?;
            record.header.require_mitdb_layout(cfg.denoise.sampling_rate)?;
            process_record(&record, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(results, cfg))
}
