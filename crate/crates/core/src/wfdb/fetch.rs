//! HTTPS download of record files into an on-disk cache.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::RawRecord;
use super::{Result, WfdbError};

pub const DEFAULT_BASE_URL: &str = "https://physionet.org/files/mitdb/1.0.0";

/// The 48 records of the MIT-BIH Arrhythmia Database.
pub const MITDB_RECORDS: [&str; 48] = [
    "100", "101", "102", "103", "104", "105", "106", "107", "108", "109", "111", "112", "113", "114", "115", "116",
    "117", "118", "119", "121", "122", "123", "124", "200", "201", "202", "203", "205", "207", "208", "209", "210",
    "212", "213", "214", "215", "217", "219", "220", "221", "222", "223", "228", "230", "231", "232", "233", "234",
];

const EXTENSIONS: [&str; 3] = ["hea", "dat", "atr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchConfig {
    pub base_url: String,
    pub cache_dir: PathBuf,
    pub timeout_secs: u64,
}

impl FetchConfig {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        FetchConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            cache_dir: cache_dir.into(),
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchedRecord {
    pub record_id: String,
    pub hea: PathBuf,
    pub dat: PathBuf,
    pub atr: PathBuf,
    /// Hex sha256 per file extension.
    pub sha256: BTreeMap<String, String>,
    /// False when every file came from the cache.
    pub downloaded: bool,
}

/// Fetches records over HTTP(S), keeping one cached copy per record id and
/// extension. Concurrent calls for the same record are serialized.
pub struct Fetcher {
    config: FetchConfig,
    client: reqwest::blocking::Client,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Fetcher {
    pub fn new(config: FetchConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| WfdbError::Network {
                url: config.base_url.clone(),
                message: e.to_string(),
            })?;
        Ok(Fetcher {
            config,
            client,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &FetchConfig {
        &self.config
    }

    fn path_for(&self, record_id: &str, ext: &str) -> PathBuf {
        self.config.cache_dir.join(format!("{record_id}.{ext}"))
    }

    fn sidecar(&self, record_id: &str) -> PathBuf {
        self.config.cache_dir.join(format!("{record_id}.sha256"))
    }

    fn fetched(&self, record_id: &str, sha256: BTreeMap<String, String>, downloaded: bool) -> FetchedRecord {
        FetchedRecord {
            record_id: record_id.to_string(),
            hea: self.path_for(record_id, "hea"),
            dat: self.path_for(record_id, "dat"),
            atr: self.path_for(record_id, "atr"),
            sha256,
            downloaded,
        }
    }

    /// Returns cached files when they match the recorded checksums,
    /// otherwise downloads, validates and caches them.
    pub fn fetch_record(&self, record_id: &str) -> Result<FetchedRecord> {
        if record_id.is_empty() || !record_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(WfdbError::Parameter(format!("invalid record id {record_id:?}")));
        }
        let lock = {
            let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
            locks.entry(record_id.to_string()).or_default().clone()
        };
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

        if let Some(sums) = self.cached(record_id)? {
            log::debug!("record {record_id}: cache hit");
            return Ok(self.fetched(record_id, sums, false));
        }

        let mut payloads = BTreeMap::new();
        for ext in EXTENSIONS {
            payloads.insert(ext, self.download(record_id, ext)?);
        }
        let hea_text = std::str::from_utf8(&payloads["hea"])
            .map_err(|_| WfdbError::Integrity(format!("record {record_id}: header is not UTF-8")))?;
        validate(record_id, hea_text, &payloads["dat"], &payloads["atr"])?;

        fs::create_dir_all(&self.config.cache_dir)?;
        let mut sums = BTreeMap::new();
        for (ext, bytes) in &payloads {
            write_atomic(&self.path_for(record_id, ext), bytes)?;
            sums.insert(ext.to_string(), sha256_hex(bytes));
        }
        let sidecar = serde_json::to_vec_pretty(&sums).expect("string map serializes");
        write_atomic(&self.sidecar(record_id), &sidecar)?;
        log::info!("record {record_id}: downloaded and cached");
        Ok(self.fetched(record_id, sums, true))
    }

    /// Checks the cache. Files without a sidecar (copied in by hand) are
    /// validated once and then get one.
    fn cached(&self, record_id: &str) -> Result<Option<BTreeMap<String, String>>> {
        let paths: Vec<PathBuf> = EXTENSIONS.iter().map(|e| self.path_for(record_id, e)).collect();
        if !paths.iter().all(|p| p.is_file()) {
            return Ok(None);
        }
        let mut sums = BTreeMap::new();
        let mut bytes = Vec::new();
        for (ext, p) in EXTENSIONS.iter().zip(&paths) {
            let b = fs::read(p)?;
            sums.insert(ext.to_string(), sha256_hex(&b));
            bytes.push(b);
        }
        let sidecar = self.sidecar(record_id);
        if sidecar.is_file() {
            let recorded: BTreeMap<String, String> = serde_json::from_slice(&fs::read(&sidecar)?)
                .map_err(|e| WfdbError::Integrity(format!("record {record_id}: bad checksum file: {e}")))?;
            if recorded == sums {
                return Ok(Some(sums));
            }
            log::warn!("record {record_id}: cached files do not match recorded checksums, refetching");
            return Ok(None);
        }
        let Ok(hea_text) = std::str::from_utf8(&bytes[0]) else {
            return Ok(None);
        };
        if validate(record_id, hea_text, &bytes[1], &bytes[2]).is_err() {
            return Ok(None);
        }
        let sidecar_bytes = serde_json::to_vec_pretty(&sums).expect("string map serializes");
        write_atomic(&sidecar, &sidecar_bytes)?;
        Ok(Some(sums))
    }

    fn download(&self, record_id: &str, ext: &str) -> Result<Vec<u8>> {
        let url = format!("{}/{record_id}.{ext}", self.config.base_url.trim_end_matches('/'));
        let network = |e: reqwest::Error| WfdbError::Network {
            url: url.clone(),
            message: e.to_string(),
        };
        let resp = self.client.get(&url).send().map_err(network)?;
        let status = resp.status();
        if status == reqwest::StatusCode::NOT_FOUND {
            return Err(WfdbError::NotFound {
                record: record_id.to_string(),
                url,
            });
        }
        if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            return Err(WfdbError::Network {
                url,
                message: format!("HTTP {status}"),
            });
        }
        if !status.is_success() {
            return Err(WfdbError::Integrity(format!("{url}: unexpected HTTP {status}")));
        }
        Ok(resp.bytes().map_err(network)?.to_vec())
    }
}

fn validate(record_id: &str, hea: &str, dat: &[u8], atr: &[u8]) -> Result<()> {
    let record = RawRecord::from_parts(hea, dat, atr).map_err(|e| match e {
        WfdbError::Integrity(m) => WfdbError::Integrity(m),
        other => WfdbError::Integrity(format!("record {record_id}: {other}")),
    })?;
    if record.record_id() != record_id {
        return Err(WfdbError::Integrity(format!(
            "header names record {}, expected {record_id}",
            record.record_id()
        )));
    }
    let expected_len = record.n_samples() * 3;
    if dat.len() != expected_len {
        return Err(WfdbError::Integrity(format!(
            "record {record_id}: signal file has {} bytes, header implies {expected_len}",
            dat.len()
        )));
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| WfdbError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_list_has_48_unique_ids() {
        let set: std::collections::BTreeSet<_> = MITDB_RECORDS.iter().collect();
        assert_eq!(set.len(), 48);
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn rejects_path_like_ids() {
        let dir = tempfile::tempdir().unwrap();
        let f = Fetcher::new(FetchConfig::new(dir.path())).unwrap();
        assert!(matches!(f.fetch_record("../x"), Err(WfdbError::Parameter(_))));
    }
}
