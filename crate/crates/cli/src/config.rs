//! Layered run configuration: built-in defaults, then a TOML file, then
//! environment variables, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use isenet::beats::{BalanceConfig, PrepareConfig};
use isenet::eval::{FinetuneConfig, FusionPolicy, Subset};
use isenet::model::ModelSpec;
use isenet::train::TrainConfig;
use isenet::wfdb::{AamiClass, DEFAULT_BASE_URL};
use serde::{Deserialize, Serialize};

use crate::exit::ConfigError;

pub const CACHE_ENV: &str = "ISENET_CACHE_DIR";
pub const REPORT_ENV: &str = "ISENET_REPORT_DIR";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub cache_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub train_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            cache_dir: "data/mitdb".into(),
            dataset_dir: "data/dataset".into(),
            train_dir: "runs/train".into(),
            report_dir: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchSection {
    pub base_url: String,
    pub timeout_secs: u64,
}

impl Default for FetchSection {
    fn default() -> Self {
        FetchSection {
            base_url: DEFAULT_BASE_URL.to_string(),
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub subsets: Vec<Subset>,
    pub positives: Vec<AamiClass>,
    pub fusion_policy: FusionPolicy,
    pub batch: usize,
    /// Write the confusion table over all retained records.
    pub confusion: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            subsets: vec![Subset::Ds2v, Subset::Ds2s, Subset::Ds2, Subset::Full],
            positives: vec![AamiClass::V, AamiClass::S],
            fusion_policy: FusionPolicy::Negative,
            batch: 256,
            confusion: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub per_class: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        AnalyzeSection {
            per_class: 500,
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub fetch: FetchSection,
    pub prepare: PrepareConfig,
    pub balance: BalanceConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub analyze: AnalyzeSection,
    pub segment: FinetuneConfig,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Defaults overlaid with `file` (if any) and the path variables.
    pub fn load(file: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = match file {
            None => RunConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("reading config {}: {e}", path.display())))?;
                let over: toml::Value = toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                let mut value = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
                merge(&mut value, over);
                value
                    .try_into()
                    .map_err(|e: toml::de::Error| ConfigError(format!("{}: {e}", path.display())))?
            }
        };
        if let Some(dir) = std::env::var_os(CACHE_ENV) {
            cfg.paths.cache_dir = dir.into();
        }
        if let Some(dir) = std::env::var_os(REPORT_ENV) {
            cfg.paths.report_dir = dir.into();
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self).context("serializing effective config")?)
    }
}
