//! On-disk dataset layout.
//!
//! A dataset directory holds `manifest.json`, and for each part (`train`,
//! `test`) a flat little-endian f32 tensor `<part>.f32` of shape
//! `[n_beats, 512, n_leads]` plus a `<part>.csv` sidecar with one row per
//! beat: `index,record_id,r_index,class,split,origin`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::balance::{label_shuffle_balance, BalanceConfig, BalanceReport};
use super::resample::BEAT_LEN;
use super::split::{class_counts, DatasetSplit, PrepareConfig, RecordStats};
use super::{Beat, BeatsError, LeadMode, Origin, Result, Split};
use crate::wfdb::{sha256_hex, AamiClass};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLists {
    pub ds1: Vec<String>,
    pub ds2: Vec<String>,
    pub ds2v: Vec<String>,
    pub ds2s: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub train_natural: [usize; 5],
    pub test: [usize; 5],
    pub rejected: [usize; 5],
    pub train_balanced: [usize; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub classes: Vec<AamiClass>,
    pub lead_mode: LeadMode,
    pub n_leads: usize,
    pub beat_len: usize,
    pub train_window_samples: usize,
    pub prepare: PrepareConfig,
    pub balance: BalanceConfig,
    pub records: RecordLists,
    pub counts: DatasetCounts,
    pub balance_report: BalanceReport,
    pub record_stats: Vec<RecordStats>,
    /// Digest per part name, filled in on save.
    #[serde(default)]
    pub files: BTreeMap<String, Vec<FileDigest>>,
}

/// The balanced training set, the natural training beats it was built
/// from and the untouched test set.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub manifest: DatasetManifest,
    pub train: Vec<Beat>,
    pub train_natural: Vec<Beat>,
    pub test: Vec<Beat>,
}

impl PreparedDataset {
    /// Balances the training split with a generator seeded from `balance.seed`.
    pub fn from_split(split: DatasetSplit, prepare: &PrepareConfig, balance: &BalanceConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(balance.seed);
        let (train, report) = label_shuffle_balance(&split.beats_train, balance, &mut rng)?;
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            classes: AamiClass::ALL.to_vec(),
            lead_mode: split.lead_mode,
            n_leads: split.lead_mode.n_leads(),
            beat_len: BEAT_LEN,
            train_window_samples: split.train_window_samples,
            prepare: prepare.clone(),
            balance: balance.clone(),
            records: RecordLists {
                ds1: split.ds1_records.clone(),
                ds2: split.ds2_records.clone(),
                ds2v: split.ds2v_records.clone(),
                ds2s: split.ds2s_records.clone(),
            },
            counts: DatasetCounts {
                train_natural: split.train_counts(),
                test: split.test_counts(),
                rejected: split.rejected_counts(),
                train_balanced: class_counts(&train),
            },
            balance_report: report,
            record_stats: split.record_stats.clone(),
            files: BTreeMap::new(),
        };
        Ok(PreparedDataset {
            manifest,
            train,
            train_natural: split.beats_train,
            test: split.beats_test,
        })
    }
}

fn tensor_bytes(beats: &[Beat], n_leads: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(beats.len() * BEAT_LEN * n_leads * 4);
    for b in beats {
        if b.n_leads != n_leads || b.leads.len() != BEAT_LEN * n_leads {
            return Err(BeatsError::Data(format!("beat at {}:{} has the wrong shape", b.record_id, b.r_index)));
        }
        for v in &b.leads {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarRow {
    index: usize,
    record_id: String,
    r_index: usize,
    class: String,
    split: Split,
    origin: Origin,
}

fn sidecar_bytes(beats: &[Beat]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (index, b) in beats.iter().enumerate() {
        w.serialize(SidecarRow {
            index,
            record_id: b.record_id.clone(),
            r_index: b.r_index,
            class: b.aami_class.symbol().to_string(),
            split: b.split,
            origin: b.origin,
        })?;
    }
    w.into_inner().map_err(|e| BeatsError::Io(e.into_error()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| BeatsError::Io(e.error))?;
    Ok(())
}

/// Writes the dataset. The returned manifest carries the file digests.
pub fn save_dataset(dir: &Path, data: &PreparedDataset) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = data.manifest.clone();
    manifest.files.clear();
    for (part, beats) in [("train", &data.train), ("train_natural", &data.train_natural), ("test", &data.test)] {
        let mut digests = Vec::new();
        for (name, bytes) in [
            (format!("{part}.f32"), tensor_bytes(beats, manifest.n_leads)?),
            (format!("{part}.csv"), sidecar_bytes(beats)?),
        ] {
            write_atomic(&dir.join(&name), &bytes)?;
            digests.push(FileDigest {
                file: name,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        manifest.files.insert(part.to_string(), digests);
    }
    write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

fn read_checked(dir: &Path, digest: &FileDigest) -> Result<Vec<u8>> {
    let bytes = fs::read(dir.join(&digest.file))?;
    if sha256_hex(&bytes) != digest.sha256 {
        return Err(BeatsError::Data(format!("{} does not match its manifest checksum", digest.file)));
    }
    Ok(bytes)
}

fn load_part(dir: &Path, manifest: &DatasetManifest, part: &str) -> Result<Vec<Beat>> {
    let digests = manifest
        .files
        .get(part)
        .ok_or_else(|| BeatsError::Data(format!("manifest lists no {part} files")))?;
    let find = |ext: &str| {
        digests
            .iter()
            .find(|d| d.file.ends_with(ext))
            .ok_or_else(|| BeatsError::Data(format!("manifest lists no {part}{ext}")))
    };
    let tensor = read_checked(dir, find(".f32")?)?;
    let sidecar = read_checked(dir, find(".csv")?)?;
    let per_beat = manifest.beat_len * manifest.n_leads;
    let values: Vec<f32> = tensor
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut beats = Vec::new();
    for row in csv::Reader::from_reader(sidecar.as_slice()).deserialize() {
        let row: SidecarRow = row?;
        let class = AamiClass::from_symbol(&row.class)
            .ok_or_else(|| BeatsError::Data(format!("unknown class {:?} in {part}.csv", row.class)))?;
        let leads = values
            .get(row.index * per_beat..(row.index + 1) * per_beat)
            .ok_or_else(|| BeatsError::Data(format!("{part}.f32 is shorter than its sidecar")))?
            .to_vec();
        beats.push(Beat {
            record_id: row.record_id,
            r_index: row.r_index,
            n_leads: manifest.n_leads,
            leads,
            aami_class: class,
            split: row.split,
            origin: row.origin,
        });
    }
    if beats.len() * per_beat != values.len() {
        return Err(BeatsError::Data(format!("{part}.f32 and {part}.csv disagree on the beat count")));
    }
    Ok(beats)
}

/// Reads a dataset written by [`save_dataset`], verifying every checksum.
pub fn load_dataset(dir: &Path) -> Result<PreparedDataset> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(BeatsError::Data(format!("unsupported dataset format {}", manifest.format_version)));
    }
    let train = load_part(dir, &manifest, "train")?;
    let train_natural = load_part(dir, &manifest, "train_natural")?;
    let test = load_part(dir, &manifest, "test")?;
    Ok(PreparedDataset {
        manifest,
        train,
        train_natural,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beat(i: usize, class: AamiClass, split: Split) -> Beat {
        Beat {
            record_id: format!("{}", 100 + i % 3),
            r_index: i * 300,
            n_leads: 2,
            leads: (0..BEAT_LEN * 2).map(|t| (t as f32 * 0.01 + i as f32).sin()).collect(),
            aami_class: class,
            split,
            origin: if i % 2 == 0 { Origin::Natural } else { Origin::Duplicated },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let split = DatasetSplit {
            ds1_records: vec!["101".into()],
            ds2_records: vec![],
            ds2v_records: vec![],
            ds2s_records: vec![],
            train_window_samples: 108000,
            lead_mode: LeadMode::Both,
            beats_train: vec![],
            beats_test: vec![],
            record_stats: vec![],
        };
        let balance = BalanceConfig {
            targets: [0; 5],
            ..BalanceConfig::default()
        };
        let mut data = PreparedDataset::from_split(split, &PrepareConfig::default(), &balance).unwrap();
        data.train = (0..5).map(|i| beat(i, AamiClass::ALL[i], Split::Train)).collect();
        data.train_natural = (0..2).map(|i| beat(i, AamiClass::N, Split::Train)).collect();
        data.test = (0..3).map(|i| beat(i, AamiClass::V, Split::Test)).collect();
        let m = save_dataset(dir.path(), &data).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.train, data.train);
        assert_eq!(back.train_natural, data.train_natural);
        assert_eq!(back.test, data.test);
        assert_eq!(back.manifest, m);
        assert_eq!(fs::metadata(dir.path().join("train.f32")).unwrap().len(), 5 * 512 * 2 * 4);
    }
}
