use serde::{Deserialize, Serialize};

use crate::beats::{Beat, DS1, DS2, DS2S, DS2V};

/// Record subset a test evaluation is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Full,
    Ds1,
    Ds2,
    Ds2v,
    Ds2s,
}

impl Subset {
    pub fn records(self) -> Option<&'static [&'static str]> {
        match self {
            Subset::Full => None,
            Subset::Ds1 => Some(&DS1),
            Subset::Ds2 => Some(&DS2),
            Subset::Ds2v => Some(&DS2V),
            Subset::Ds2s => Some(&DS2S),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Full => "full",
            Subset::Ds1 => "ds1",
            Subset::Ds2 => "ds2",
            Subset::Ds2v => "ds2v",
            Subset::Ds2s => "ds2s",
        }
    }

    pub fn contains(self, record_id: &str) -> bool {
        self.records().is_none_or(|r| r.contains(&record_id))
    }
}

impl std::str::FromStr for Subset {
    type Err = super::EvalError;

    fn from_str(s: &str) -> super::Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "full" | "all" => Ok(Subset::Full),
            "ds1" => Ok(Subset::Ds1),
            "ds2" => Ok(Subset::Ds2),
            "ds2v" => Ok(Subset::Ds2v),
            "ds2s" => Ok(Subset::Ds2s),
            _ => Err(super::EvalError::Config(format!("unknown subset {s:?}"))),
        }
    }
}

/// Beats whose record belongs to `subset`, in input order.
pub fn filter_beats(beats: &[Beat], subset: Subset) -> Vec<&Beat> {
    beats.iter().filter(|b| subset.contains(&b.record_id)).collect()
}
