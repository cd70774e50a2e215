//! Synthetic two-lead records in mitdb layout for end-to-end tests.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use isenet::beats::exclude_records;
use isenet::wfdb::{encode_format212, MITDB_RECORDS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAIN: f64 = 200.0;
pub const BASELINE: i32 = 1024;

/// Class cycle as MIT codes: N, A (S), V, F, Q.
const PATTERN: [u8; 10] = [1, 1, 8, 1, 5, 1, 1, 6, 1, 13];

#[derive(Debug, Clone)]
pub struct SynthRecord {
    pub id: String,
    pub hea: String,
    pub dat: Vec<u8>,
    pub atr: Vec<u8>,
    /// Annotated (sample, code) pairs.
    pub beats: Vec<(usize, u8)>,
}

fn gaussian(t: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((t - centre) / width).powi(2)).exp()
}

/// Millivolt waveform of one beat around its R peak for each lead.
fn beat_shape(code: u8, dt: f64) -> [f64; 2] {
    let (qrs, width, p, t) = match code {
        1 => (1.2, 8.0, 0.15, 0.3),
        8 => (1.1, 8.0, 0.0, 0.25),
        5 => (-1.6, 20.0, 0.0, -0.4),
        6 => (0.4, 14.0, 0.08, -0.1),
        _ => (0.3, 4.0, 0.0, 0.0),
    };
    let v = qrs * gaussian(dt, 0.0, width) + p * gaussian(dt, -70.0, 12.0) + t * gaussian(dt, 90.0, 25.0);
    [v, -0.6 * v + 0.05 * gaussian(dt, 30.0, 20.0)]
}

/// Builds one record of `n_samples` frames at 360 Hz.
pub fn synth_record(id: &str, n_samples: usize, seed: u64) -> SynthRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id.bytes().fold(0u64, |h, b| h * 31 + u64::from(b)));
    let mut beats = Vec::new();
    let mut r = 150 + rng.random_range(0..50);
    let mut k = rng.random_range(0..PATTERN.len());
    while r + 150 < n_samples {
        let code = PATTERN[k % PATTERN.len()];
        beats.push((r, code));
        let rr = if code == 8 { 210 } else { 270 } + rng.random_range(0..40);
        r += rr;
        k += 1;
    }
    let mut mv = vec![[0f64; 2]; n_samples];
    for (i, frame) in mv.iter_mut().enumerate() {
        let wander = 0.1 * (i as f64 * 2.0 * std::f64::consts::PI * 0.3 / 360.0).sin();
        frame[0] = wander + 0.02 * rng.random_range(-1.0..1.0);
        frame[1] = -wander + 0.02 * rng.random_range(-1.0..1.0);
    }
    for &(r, code) in &beats {
        for i in r.saturating_sub(150)..(r + 150).min(n_samples) {
            let s = beat_shape(code, i as f64 - r as f64);
            mv[i][0] += s[0];
            mv[i][1] += s[1];
        }
    }
    let frames: Vec<[i16; 2]> = mv
        .iter()
        .map(|f| f.map(|v| ((v * GAIN).round() as i32 + BASELINE).clamp(-2048, 2047) as i16))
        .collect();
    let dat = encode_format212(&frames).expect("12-bit samples");
    let checksum = |j: usize| frames.iter().fold(0i16, |a, f| a.wrapping_add(f[j]));
    let hea = format!(
        "{id} 2 360 {n_samples}\n\
         {id}.dat 212 200 11 1024 {} {} 0 MLII\n\
         {id}.dat 212 200 11 1024 {} {} 0 V1\n",
        frames[0][0],
        checksum(0),
        frames[0][1],
        checksum(1)
    );
    SynthRecord {
        id: id.to_string(),
        hea,
        dat,
        atr: encode_annotations(&beats),
        beats,
    }
}

/// MIT annotation stream with a SKIP word for gaps over 1023 samples.
pub fn encode_annotations(beats: &[(usize, u8)]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut last = 0usize;
    for &(s, code) in beats {
        let mut delta = s - last;
        if delta > 1023 {
            out.extend((59u16 << 10).to_le_bytes());
            let skip = delta as u32;
            out.extend(((skip >> 16) as u16).to_le_bytes());
            out.extend(((skip & 0xFFFF) as u16).to_le_bytes());
            delta = 0;
        }
        out.extend(((u16::from(code) << 10) | delta as u16).to_le_bytes());
        last = s;
    }
    out.extend([0, 0]);
    out
}

pub fn write_record(dir: &Path, r: &SynthRecord) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(format!("{}.hea", r.id)), &r.hea).unwrap();
    fs::write(dir.join(format!("{}.dat", r.id)), &r.dat).unwrap();
    fs::write(dir.join(format!("{}.atr", r.id)), &r.atr).unwrap();
}

/// Writes every retained mitdb record id into `dir`.
pub fn write_mitdb_like(dir: &Path, n_samples: usize, seed: u64) -> Vec<String> {
    let ids: Vec<String> = exclude_records(MITDB_RECORDS.iter().copied()).into_iter().collect();
    for id in &ids {
        write_record(dir, &synth_record(id, n_samples, seed));
    }
    ids
}
