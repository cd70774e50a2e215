//! Format 212: two 12-bit two's-complement samples packed into 3 bytes.
//!
//! byte0 = low 8 bits of A, byte1 = (high nibble of B) << 4 | high nibble
//! of A, byte2 = low 8 bits of B.

use super::{Result, WfdbError};

pub const SAMPLE_MIN: i16 = -2048;
pub const SAMPLE_MAX: i16 = 2047;

#[inline]
fn sign_extend_12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

/// Unpacks one 3-byte group into its two samples.
#[inline]
pub fn decode_group(g: [u8; 3]) -> (i16, i16) {
    let a = u16::from(g[0]) | (u16::from(g[1] & 0x0F) << 8);
    let b = u16::from(g[2]) | (u16::from(g[1] & 0xF0) << 4);
    (sign_extend_12(a), sign_extend_12(b))
}

/// Packs two samples in `[-2048, 2047]` into one 3-byte group.
#[inline]
pub fn encode_group(a: i16, b: i16) -> [u8; 3] {
    let (a, b) = (a as u16 & 0x0FFF, b as u16 & 0x0FFF);
    [(a & 0xFF) as u8, (((b >> 8) << 4) | (a >> 8)) as u8, (b & 0xFF) as u8]
}

/// Decodes `n_samples` two-signal frames, returned as `[a, b]` pairs.
pub fn decode_format212(raw: &[u8], n_samples: usize) -> Result<Vec<[i16; 2]>> {
    let needed = n_samples.checked_mul(3).ok_or_else(|| WfdbError::Format("sample count overflow".into()))?;
    if raw.len() < needed {
        return Err(WfdbError::Format(format!(
            "format 212 stream truncated: {} bytes for {n_samples} frames (need {needed})",
            raw.len()
        )));
    }
    Ok(raw[..needed]
        .chunks_exact(3)
        .map(|g| {
            let (a, b) = decode_group([g[0], g[1], g[2]]);
            [a, b]
        })
        .collect())
}

/// Inverse of [`decode_format212`]. Samples outside the 12-bit range are
/// a format error.
pub fn encode_format212(frames: &[[i16; 2]]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(frames.len() * 3);
    for &[a, b] in frames {
        if !(SAMPLE_MIN..=SAMPLE_MAX).contains(&a) || !(SAMPLE_MIN..=SAMPLE_MAX).contains(&b) {
            return Err(WfdbError::Format(format!("sample pair ({a}, {b}) outside 12-bit range")));
        }
        out.extend_from_slice(&encode_group(a, b));
    }
    Ok(out)
}
