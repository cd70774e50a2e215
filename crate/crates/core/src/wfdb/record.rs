use std::fs;
use std::path::Path;

use super::annotation::{parse_annotations, Annotation};
use super::format212::decode_format212;
use super::header::RecordHeader;
use super::{is_qrs, Result, WfdbError};

/// Converts an ADC count to millivolts.
pub fn adc_to_physical(adc: i32, gain: f64, baseline: i32) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(WfdbError::Parameter(format!("gain must be positive, got {gain}")));
    }
    Ok(f64::from(adc - baseline) / gain)
}

/// A decoded two-signal recording in physical units.
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub header: RecordHeader,
    /// One millivolt series per signal, each `n_samples` long.
    pub signals: [Vec<f32>; 2],
    pub annotations: Vec<Annotation>,
}

impl RawRecord {
    pub fn record_id(&self) -> &str {
        &self.header.record_id
    }

    pub fn n_samples(&self) -> usize {
        self.header.n_samples
    }

    /// Annotations that mark a QRS complex, in stream order.
    pub fn beat_annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(|a| is_qrs(a.mit_code))
    }

    /// Builds a record from the three file payloads and checks them against
    /// each other (sample count, header checksums, annotation range).
    pub fn from_parts(header_text: &str, dat: &[u8], atr: &[u8]) -> Result<RawRecord> {
        let header = RecordHeader::parse(header_text)?;
        if header.n_signals() != 2 {
            return Err(WfdbError::Header(format!(
                "record {} has {} signals, expected 2",
                header.record_id,
                header.n_signals()
            )));
        }
        if let Some(s) = header.signals.iter().find(|s| s.format_code != 212) {
            return Err(WfdbError::Header(format!("unsupported signal format {}", s.format_code)));
        }
        let n = if header.n_samples == 0 { dat.len() / 3 } else { header.n_samples };
        let frames = decode_format212(dat, n)?;

        for (j, spec) in header.signals.iter().enumerate() {
            if let Some(expected) = spec.checksum {
                let sum = frames.iter().fold(0i16, |acc, f| acc.wrapping_add(f[j]));
                if sum != expected as i16 {
                    return Err(WfdbError::Integrity(format!(
                        "record {} signal {j}: checksum {sum} != header {expected}",
                        header.record_id
                    )));
                }
            }
            if let (Some(init), Some(first)) = (spec.initial_value, frames.first()) {
                if i32::from(first[j]) != init {
                    return Err(WfdbError::Integrity(format!(
                        "record {} signal {j}: first sample {} != header initial value {init}",
                        header.record_id, first[j]
                    )));
                }
            }
        }

        let mut signals = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for (j, spec) in header.signals.iter().enumerate() {
            for f in &frames {
                signals[j].push(adc_to_physical(i32::from(f[j]), spec.gain, spec.baseline)? as f32);
            }
        }

        let annotations = parse_annotations(atr)?;
        if let Some(a) = annotations.iter().find(|a| a.sample_index >= n) {
            return Err(WfdbError::Integrity(format!(
                "annotation at sample {} beyond record length {n}",
                a.sample_index
            )));
        }
        let mut last: Option<usize> = None;
        for a in annotations.iter().filter(|a| is_qrs(a.mit_code)) {
            if last.is_some_and(|l| a.sample_index <= l) {
                return Err(WfdbError::Integrity(format!(
                    "beat annotations not strictly increasing at sample {}",
                    a.sample_index
                )));
            }
            last = Some(a.sample_index);
        }

        let mut header = header;
        header.n_samples = n;
        Ok(RawRecord {
            header,
            signals,
            annotations,
        })
    }
}

/// Reads `<id>.hea`, its signal file and `<id>.atr` from `dir`.
pub fn load_record(dir: &Path, record_id: &str) -> Result<RawRecord> {
    let header_text = fs::read_to_string(dir.join(format!("{record_id}.hea")))?;
    let header = RecordHeader::parse(&header_text)?;
    let dat_name = header
        .signals
        .first()
        .map(|s| s.file_name.clone())
        .unwrap_or_else(|| format!("{record_id}.dat"));
    let dat = fs::read(dir.join(dat_name))?;
    let atr = fs::read(dir.join(format!("{record_id}.atr")))?;
    RawRecord::from_parts(&header_text, &dat, &atr)
}
