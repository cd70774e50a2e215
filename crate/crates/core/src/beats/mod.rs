//! Beat segmentation, filtering, resampling, splitting and class balancing.

mod balance;
mod container;
mod filter;
mod normalize;
mod records;
mod resample;
mod segment;
mod split;

use serde::{Deserialize, Serialize};

use crate::wfdb::{AamiClass, WfdbError};

pub use balance::{label_shuffle_balance, nearest_neighbors, smote_oversample, tomek_edit, tomek_links, BalanceConfig, BalanceReport};
pub use container::{load_dataset, save_dataset, DatasetCounts, DatasetManifest, FileDigest, PreparedDataset, RecordLists};
pub use filter::{denoise, median_filter, moving_average, DenoiseConfig, Denoised};
pub use normalize::{normalize_beat, normalize_lead, NORMALIZE_EPS};
pub use records::{exclude_records, DS1, DS2, DS2S, DS2V, NON_V1_RECORDS, PACED_RECORDS};
pub use resample::{resample_indices, resample_to_512, spline_resample, Resampled, BEAT_LEN};
pub use segment::{segment_beats, window_bounds, BeatWindow};
pub use split::{
    build_splits, build_splits_from_dir, class_counts, process_record, DatasetSplit, DenoiseScope, PrepareConfig, RecordStats,
    TRAIN_WINDOW_SAMPLES,
};

#[derive(Debug, thiserror::Error)]
pub enum BeatsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Wfdb(#[from] WfdbError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sidecar error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BeatsError>;

/// Which recording channels a dataset or model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeadMode {
    Mlii,
    V1,
    Both,
}

impl LeadMode {
    pub fn n_leads(self) -> usize {
        match self {
            LeadMode::Both => 2,
            _ => 1,
        }
    }

    /// Record signal indices used, in channel order.
    pub fn channels(self) -> &'static [usize] {
        match self {
            LeadMode::Mlii => &[0],
            LeadMode::V1 => &[1],
            LeadMode::Both => &[0, 1],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LeadMode::Mlii => "mlii",
            LeadMode::V1 => "v1",
            LeadMode::Both => "both",
        }
    }
}

impl std::str::FromStr for LeadMode {
    type Err = BeatsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlii" => Ok(LeadMode::Mlii),
            "v1" => Ok(LeadMode::V1),
            "both" => Ok(LeadMode::Both),
            _ => Err(BeatsError::Config(format!("unknown lead mode {s:?} (expected mlii, v1 or both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Natural,
    SmoteSynthetic,
    Duplicated,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Natural => "natural",
            Origin::SmoteSynthetic => "smote_synthetic",
            Origin::Duplicated => "duplicated",
        }
    }
}

/// One preprocessed heartbeat. `leads` is time-major: sample `t` of
/// channel `c` sits at `t * n_leads + c`, matching a `[1, 512, n_leads]`
/// slice of the model input.
#[derive(Debug, Clone, PartialEq)]
pub struct Beat {
    pub record_id: String,
    pub r_index: usize,
    pub n_leads: usize,
    pub leads: Vec<f32>,
    pub aami_class: AamiClass,
    pub split: Split,
    pub origin: Origin,
}

impl Beat {
    pub fn lead(&self, c: usize) -> impl Iterator<Item = f32> + '_ {
        self.leads.iter().skip(c).step_by(self.n_leads).copied()
    }

    /// Class index in `AamiClass::ALL`.
    pub fn label(&self) -> usize {
        self.aami_class.index().expect("beats never carry the Excluded class")
    }
}
