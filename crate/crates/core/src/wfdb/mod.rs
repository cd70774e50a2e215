//! Reading MIT-BIH Arrhythmia recordings in WFDB format.

mod aami;
pub mod annotation;
pub mod fetch;
pub mod format212;
pub mod header;
mod record;

pub use aami::{is_qrs, map_aami, AamiClass};
pub use annotation::{parse_annotations, Annotation};
pub use fetch::{sha256_hex, FetchConfig, FetchedRecord, Fetcher, DEFAULT_BASE_URL, MITDB_RECORDS};
pub use format212::{decode_format212, encode_format212};
pub use header::{RecordHeader, SignalSpec};
pub use record::{adc_to_physical, load_record, RawRecord};

#[derive(Debug, thiserror::Error)]
pub enum WfdbError {
    #[error("format error: {0}")]
    Format(String),
    #[error("header error: {0}")]
    Header(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("record {record} not found at {url}")]
    NotFound { record: String, url: String },
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WfdbError {
    /// Whether retrying the same operation may succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, WfdbError::Network { .. })
    }
}

pub type Result<T> = std::result::Result<T, WfdbError>;
