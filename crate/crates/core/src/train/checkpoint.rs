//! Checkpoint directories: `manifest.json`, `params.bin` (little-endian f32
//! per parameter, ordered by name) and optionally `optimizer.bin`
//! (little-endian f64 moments, ordered by parameter name).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::{AdamConfig, MomentumConfig, OptimizerKind, OptimizerState, Slot};
use super::trainer::ValMetrics;
use super::{Result, TrainError};
use crate::model::{truncate_and_head, HeadInit, ModelSpec, Network};
use crate::wfdb::sha256_hex;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in f32 values into `params.bin`.
    pub offset: usize,
    pub trainable: bool,
    pub decayable: bool,
    pub lr_scale: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub name: String,
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerEntry {
    pub kind: OptimizerKind,
    pub adam: AdamConfig,
    pub momentum: MomentumConfig,
    pub step: u64,
    pub slots: Vec<SlotEntry>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub spec: ModelSpec,
    /// Number of kept blocks when the network carries a truncation head.
    pub truncated_after_block: Option<usize>,
    pub epoch: usize,
    pub metrics: Option<ValMetrics>,
    pub tensors: Vec<TensorEntry>,
    pub params_sha256: String,
    pub optimizer: Option<OptimizerEntry>,
}

pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub network: Network,
    pub optimizer: Option<OptimizerState>,
}

/// Writes a checkpoint into `dir`, replacing any previous content. The
/// directory is assembled next to its destination and renamed into place.
pub fn save_checkpoint(
    dir: &Path,
    net: &Network,
    optimizer: Option<&OptimizerState>,
    epoch: usize,
    metrics: Option<&ValMetrics>,
) -> Result<CheckpointManifest> {
    let mut tensors = Vec::new();
    let mut params = Vec::new();
    let mut offset = 0;
    for id in net.params.sorted_ids() {
        let p = net.params.get(id);
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.shape.clone(),
            offset,
            trainable: p.trainable,
            decayable: p.decayable,
            lr_scale: p.lr_scale,
        });
        offset += p.values.len();
        params.extend(p.values.iter().flat_map(|v| v.to_le_bytes()));
    }
    let optimizer_bytes = optimizer.map(|o| {
        let mut slots: Vec<&Slot> = o.slots.iter().collect();
        slots.sort_by(|a, b| a.name.cmp(&b.name));
        let bytes: Vec<u8> = slots
            .iter()
            .flat_map(|s| s.first.iter().chain(&s.second))
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let entry = OptimizerEntry {
            kind: o.kind,
            adam: o.adam,
            momentum: o.momentum,
            step: o.step,
            slots: slots
                .iter()
                .map(|s| SlotEntry {
                    name: s.name.clone(),
                    first: s.first.len(),
                    second: s.second.len(),
                })
                .collect(),
            sha256: sha256_hex(&bytes),
        };
        (entry, bytes)
    });
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT,
        spec: net.spec.clone(),
        truncated_after_block: net.is_truncated().then(|| net.n_blocks()),
        epoch,
        metrics: metrics.cloned(),
        tensors,
        params_sha256: sha256_hex(&params),
        optimizer: optimizer_bytes.as_ref().map(|(e, _)| e.clone()),
    };

    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let staging = tempfile::Builder::new().prefix(".ckpt").tempdir_in(parent)?;
    fs::write(staging.path().join("params.bin"), &params)?;
    if let Some((_, bytes)) = &optimizer_bytes {
        fs::write(staging.path().join("optimizer.bin"), bytes)?;
    }
    fs::write(staging.path().join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(staging.keep(), dir)?;
    Ok(manifest)
}

fn corrupt(dir: &Path, msg: impl std::fmt::Display) -> TrainError {
    TrainError::Checkpoint(format!("{}: {msg}", dir.display()))
}

/// Rebuilds the network (and optimizer state when present) stored in `dir`.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format_version != CHECKPOINT_FORMAT {
        return Err(corrupt(dir, format!("unsupported format version {}", manifest.format_version)));
    }
    let bytes = fs::read(dir.join("params.bin"))?;
    if sha256_hex(&bytes) != manifest.params_sha256 {
        return Err(corrupt(dir, "params.bin does not match its checksum"));
    }
    let mut network = rebuild(&manifest.spec, manifest.truncated_after_block)?;
    if network.params.len() != manifest.tensors.len() {
        return Err(corrupt(
            dir,
            format!("{} tensors stored, architecture has {}", manifest.tensors.len(), network.params.len()),
        ));
    }
    for t in &manifest.tensors {
        let id = network
            .params
            .id(&t.name)
            .ok_or_else(|| corrupt(dir, format!("unknown tensor {}", t.name)))?;
        let p = network.params.get_mut(id);
        if p.shape != t.shape {
            return Err(corrupt(dir, format!("tensor {} has shape {:?}, expected {:?}", t.name, t.shape, p.shape)));
        }
        let n = p.values.len();
        let raw = bytes
            .get(4 * t.offset..4 * (t.offset + n))
            .ok_or_else(|| corrupt(dir, format!("tensor {} runs past params.bin", t.name)))?;
        p.values = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        p.trainable = t.trainable;
        p.decayable = t.decayable;
        p.lr_scale = t.lr_scale;
    }

    let optimizer = match &manifest.optimizer {
        None => None,
        Some(entry) => {
            let raw = fs::read(dir.join("optimizer.bin"))?;
            if sha256_hex(&raw) != entry.sha256 {
                return Err(corrupt(dir, "optimizer.bin does not match its checksum"));
            }
            let mut values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
            let mut slots = Vec::new();
            for s in &entry.slots {
                let first: Vec<f64> = values.by_ref().take(s.first).collect();
                let second: Vec<f64> = values.by_ref().take(s.second).collect();
                if first.len() != s.first || second.len() != s.second {
                    return Err(corrupt(dir, "optimizer.bin is truncated"));
                }
                slots.push(Slot {
                    name: s.name.clone(),
                    first,
                    second,
                });
            }
            let mut state = OptimizerState::new(entry.kind, entry.adam, entry.momentum, &network.params);
            state.step = entry.step;
            state.slots = slots;
            state.reindex();
            Some(state)
        }
    };
    Ok(Checkpoint {
        manifest,
        network,
        optimizer,
    })
}

fn rebuild(spec: &ModelSpec, truncated_after_block: Option<usize>) -> Result<Network> {
    let base = Network::build(spec)?;
    Ok(match truncated_after_block {
        None => base,
        Some(cut) => truncate_and_head(&base, cut, spec.n_classes, &HeadInit::Random, 1.0, spec.seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Attention;

    fn small() -> Network {
        Network::build(&ModelSpec {
            depth: 11,
            attention: Attention::IsePre,
            seed: 3,
            ..ModelSpec::default()
        })
        .unwrap()
    }

    fn assert_same(a: &Network, b: &Network) {
        assert_eq!(a.params.len(), b.params.len());
        for p in a.params.iter() {
            let q = b.params.by_name(&p.name).unwrap();
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&p.values), bits(&q.values), "{}", p.name);
            assert_eq!((p.trainable, p.decayable, p.lr_scale), (q.trainable, q.decayable, q.lr_scale));
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = small();
        for p in net.params.iter_mut() {
            for (i, v) in p.values.iter_mut().enumerate() {
                *v += (i as f32 * 1e-7).sin();
            }
        }
        let mut opt = OptimizerState::new(OptimizerKind::Adam, AdamConfig::default(), MomentumConfig::default(), &net.params);
        opt.step = 7;
        opt.slots[0].first[0] = std::f64::consts::PI;
        let path = dir.path().join("epoch_0001");
        save_checkpoint(&path, &net, Some(&opt), 1, None).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_same(&net, &ck.network);
        let back = ck.optimizer.unwrap();
        assert_eq!(back.step, 7);
        assert_eq!(back.slots, {
            let mut s = opt.slots.clone();
            s.sort_by(|a, b| a.name.cmp(&b.name));
            s
        });
    }

    #[test]
    fn truncated_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = truncate_and_head(&small(), 2, 2, &HeadInit::Random, 0.1, 9).unwrap();
        save_checkpoint(dir.path().join("c").as_path(), &net, None, 0, None).unwrap();
        let ck = load_checkpoint(&dir.path().join("c")).unwrap();
        assert_eq!(ck.manifest.truncated_after_block, Some(2));
        assert_same(&net, &ck.network);
    }

    #[test]
    fn tampered_params_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c");
        save_checkpoint(&path, &small(), None, 0, None).unwrap();
        let mut bytes = fs::read(path.join("params.bin")).unwrap();
        bytes[0] ^= 1;
        fs::write(path.join("params.bin"), bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(TrainError::Checkpoint(_))));
    }
}
