//! MIT annotation stream decoding.
//!
//! The stream is a sequence of little-endian 16-bit words. The high 6 bits
//! hold the annotation type, the low 10 bits a time increment (or a
//! pseudo-annotation argument). A zero word terminates the stream.

use serde::{Deserialize, Serialize};

use super::aami::{map_aami, AamiClass};
use super::{Result, WfdbError};

pub const SKIP: u8 = 59;
pub const NUM: u8 = 60;
pub const SUB: u8 = 61;
pub const CHN: u8 = 62;
pub const AUX: u8 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sample_index: usize,
    pub mit_code: u8,
    pub aami_class: AamiClass,
}

impl Annotation {
    pub fn new(sample_index: usize, mit_code: u8) -> Self {
        Annotation {
            sample_index,
            mit_code,
            aami_class: map_aami(mit_code),
        }
    }
}

struct Words<'a> {
    raw: &'a [u8],
    pos: usize,
}

impl Words<'_> {
    fn next_word(&mut self) -> Option<u16> {
        let bytes = self.raw.get(self.pos..self.pos + 2)?;
        self.pos += 2;
        Some(u16::from_le_bytes([bytes[0], bytes[1]]))
    }

    fn skip_bytes(&mut self, n: usize) -> Option<()> {
        if self.pos + n > self.raw.len() {
            return None;
        }
        self.pos += n;
        Some(())
    }
}

/// Decodes an annotation stream. Pseudo-annotations (SKIP, NUM, SUB, CHN,
/// AUX) are consumed and dropped; every other word becomes an
/// [`Annotation`] at the cumulative sample time.
pub fn parse_annotations(raw: &[u8]) -> Result<Vec<Annotation>> {
    let mut words = Words { raw, pos: 0 };
    let mut time: i64 = 0;
    let mut out = Vec::new();
    loop {
        let word = words
            .next_word()
            .ok_or_else(|| WfdbError::Format(format!("annotation stream ends without terminator at byte {}", words.pos)))?;
        let code = (word >> 10) as u8;
        let arg = word & 0x03FF;
        match code {
            0 if arg == 0 => return Ok(out),
            SKIP => {
                let (hi, lo) = match (words.next_word(), words.next_word()) {
                    (Some(hi), Some(lo)) => (hi, lo),
                    _ => return Err(WfdbError::Format("SKIP without its 4-byte interval".into())),
                };
                // PDP-11 long: high half first, each half little-endian
                let interval = ((u32::from(hi) << 16) | u32::from(lo)) as i32;
                time += i64::from(interval);
                if time < 0 {
                    return Err(WfdbError::Format(format!("SKIP moves annotation time to {time}")));
                }
            }
            NUM | SUB | CHN => {}
            AUX => {
                let len = usize::from(arg);
                words
                    .skip_bytes(len + (len & 1))
                    .ok_or_else(|| WfdbError::Format(format!("AUX payload of {len} bytes runs past end of stream")))?;
            }
            _ => {
                time += i64::from(arg);
                out.push(Annotation::new(time as usize, code));
            }
        }
    }
}
