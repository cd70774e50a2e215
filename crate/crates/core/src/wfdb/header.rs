use serde::{Deserialize, Serialize};

use super::{Result, WfdbError};

/// One signal specification line of a `.hea` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub file_name: String,
    pub format_code: u16,
    /// ADC units per mV.
    pub gain: f64,
    /// ADC value that maps to 0 mV.
    pub baseline: i32,
    pub adc_resolution: Option<u32>,
    pub adc_zero: Option<i32>,
    pub initial_value: Option<i32>,
    /// 16-bit sum of all samples of the signal as recorded in the header.
    pub checksum: Option<i32>,
    pub lead_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub record_id: String,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
}

impl RecordHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn lead_names(&self) -> Vec<&str> {
        self.signals.iter().map(|s| s.lead_name.as_str()).collect()
    }

    /// Parses WFDB header text (record line, signal lines, `#` comments).
    pub fn parse(text: &str) -> Result<RecordHeader> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let record_line = lines.next().ok_or_else(|| header_err("empty header"))?;
        let fields: Vec<&str> = record_line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(header_err(format!("record line too short: {record_line:?}")));
        }
        let record_id = fields[0].split('/').next().unwrap_or(fields[0]).to_string();
        if record_id.is_empty() {
            return Err(header_err("missing record name"));
        }
        let n_signals: usize = parse_field(fields[1], "number of signals")?;
        // frequency may be written as "360/360(...)" or "360"
        let sampling_rate = match fields.get(2) {
            Some(f) => parse_field::<f64>(f.split(['/', '(']).next().unwrap_or(f), "sampling frequency")?,
            None => 250.0,
        };
        let n_samples: usize = match fields.get(3) {
            Some(f) => parse_field(f, "number of samples")?,
            None => 0,
        };

        let mut signals = Vec::with_capacity(n_signals);
        for _ in 0..n_signals {
            let line = lines
                .next()
                .ok_or_else(|| header_err(format!("expected {n_signals} signal lines, found {}", signals.len())))?;
            signals.push(parse_signal_line(line)?);
        }
        let header = RecordHeader {
            record_id,
            sampling_rate,
            n_samples,
            signals,
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0) {
            return Err(header_err(format!("sampling rate {} must be positive", self.sampling_rate)));
        }
        for s in &self.signals {
            if !(s.gain > 0.0) {
                return Err(WfdbError::Parameter(format!("gain {} of {} must be positive", s.gain, s.lead_name)));
            }
        }
        Ok(())
    }

    /// Checks the shape assumed by the mitdb pipeline: two 212-format
    /// signals at the given rate.
    pub fn require_mitdb_layout(&self, expected_rate: f64) -> Result<()> {
        if self.n_signals() != 2 {
            return Err(header_err(format!("record {} has {} signals, expected 2", self.record_id, self.n_signals())));
        }
        if let Some(s) = self.signals.iter().find(|s| s.format_code != 212) {
            return Err(header_err(format!("record {} uses format {}, only 212 is supported", self.record_id, s.format_code)));
        }
        if (self.sampling_rate - expected_rate).abs() > 1e-9 {
            return Err(header_err(format!(
                "record {} sampled at {} Hz, expected {expected_rate}",
                self.record_id, self.sampling_rate
            )));
        }
        Ok(())
    }
}

fn header_err(msg: impl Into<String>) -> WfdbError {
    WfdbError::Header(msg.into())
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| header_err(format!("invalid {what}: {s:?}")))
}

fn parse_signal_line(line: &str) -> Result<SignalSpec> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(header_err(format!("signal line too short: {line:?}")));
    }
    let file_name = fields[0].to_string();
    // "212", "212x2", "212:skew", "212+offset"
    let fmt_digits: String = fields[1].chars().take_while(char::is_ascii_digit).collect();
    let format_code: u16 = parse_field(&fmt_digits, "signal format")?;

    let adc_resolution = fields.get(3).map(|f| parse_field(f, "ADC resolution")).transpose()?;
    let adc_zero: Option<i32> = fields.get(4).map(|f| parse_field(f, "ADC zero")).transpose()?;
    let initial_value = fields.get(5).map(|f| parse_field(f, "initial value")).transpose()?;
    let checksum = fields.get(6).map(|f| parse_field(f, "checksum")).transpose()?;
    let lead_name = if fields.len() > 8 { fields[8..].join(" ") } else { String::new() };

    // gain field: "200", "200(1024)", "200/mV", "200(1024)/mV"
    let (gain, baseline) = match fields.get(2) {
        Some(g) => {
            let g = g.split('/').next().unwrap_or(g);
            match g.split_once('(') {
                Some((gain, rest)) => {
                    let base = rest.trim_end_matches(')');
                    (parse_field::<f64>(gain, "gain")?, Some(parse_field::<i32>(base, "baseline")?))
                }
                None => (parse_field::<f64>(g, "gain")?, None),
            }
        }
        None => (200.0, None),
    };
    // WFDB: a zero gain means "uncalibrated, use the default of 200"
    let gain = if gain == 0.0 { 200.0 } else { gain };
    let baseline = baseline.or(adc_zero).unwrap_or(0);

    Ok(SignalSpec {
        file_name,
        format_code,
        gain,
        baseline,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        lead_name,
    })
}
