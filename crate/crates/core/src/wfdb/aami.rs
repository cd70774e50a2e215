use std::fmt;

use serde::{Deserialize, Serialize};

/// AAMI beat superclass of an MIT-BIH annotation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AamiClass {
    N,
    S,
    V,
    F,
    Q,
    Excluded,
}

impl AamiClass {
    /// The five scored classes in index order.
    pub const ALL: [AamiClass; 5] = [AamiClass::N, AamiClass::S, AamiClass::V, AamiClass::F, AamiClass::Q];

    /// Position in [`AamiClass::ALL`]; `None` for `Excluded`.
    pub fn index(self) -> Option<usize> {
        match self {
            AamiClass::N => Some(0),
            AamiClass::S => Some(1),
            AamiClass::V => Some(2),
            AamiClass::F => Some(3),
            AamiClass::Q => Some(4),
            AamiClass::Excluded => None,
        }
    }

    pub fn from_index(i: usize) -> Option<AamiClass> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            AamiClass::N => "N",
            AamiClass::S => "S",
            AamiClass::V => "V",
            AamiClass::F => "F",
            AamiClass::Q => "Q",
            AamiClass::Excluded => "X",
        }
    }

    pub fn from_symbol(s: &str) -> Option<AamiClass> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N" => Some(AamiClass::N),
            "S" => Some(AamiClass::S),
            "V" => Some(AamiClass::V),
            "F" => Some(AamiClass::F),
            "Q" => Some(AamiClass::Q),
            _ => None,
        }
    }
}

impl fmt::Display for AamiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Maps an MIT-BIH beat type code to its AAMI superclass.
///
/// N: 1 normal, 2 LBBB, 3 RBBB, 25 BBB.
/// S: 4 aberrated APC, 7 nodal premature, 8 APC, 9 SVPB, 11 nodal escape,
/// 34 atrial escape, 35 supraventricular escape.
/// V: 5 PVC, 10 ventricular escape. F: 6 fusion.
/// Q: 12 paced, 13 unclassifiable, 38 paced fusion.
pub fn map_aami(mit_code: u8) -> AamiClass {
    match mit_code {
        1 | 2 | 3 | 25 => AamiClass::N,
        4 | 7 | 8 | 9 | 11 | 34 | 35 => AamiClass::S,
        5 | 10 => AamiClass::V,
        6 => AamiClass::F,
        12 | 13 | 38 => AamiClass::Q,
        _ => AamiClass::Excluded,
    }
}

/// Whether a code marks a QRS complex (WFDB `isqrs` table). Only these
/// annotations act as R-peaks for segmentation.
pub fn is_qrs(mit_code: u8) -> bool {
    matches!(mit_code, 1..=13 | 25 | 30 | 34 | 35 | 38 | 41)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_codes() {
        assert_eq!(map_aami(8), AamiClass::S);
        assert_eq!(map_aami(5), AamiClass::V);
        assert_eq!(map_aami(14), AamiClass::Excluded);
    }

    #[test]
    fn listed_codes_partition_as_4_7_2_1_3() {
        let mut counts = [0usize; 5];
        let mut listed = 0;
        for code in 0..=u8::MAX {
            if let Some(i) = map_aami(code).index() {
                counts[i] += 1;
                listed += 1;
                assert!(is_qrs(code), "listed code {code} must be a QRS code");
            }
        }
        assert_eq!(counts, [4, 7, 2, 1, 3]);
        assert_eq!(listed, 17);
    }

    #[test]
    fn symbols_round_trip() {
        for c in AamiClass::ALL {
            assert_eq!(AamiClass::from_symbol(c.symbol()), Some(c));
            assert_eq!(AamiClass::from_index(c.index().unwrap()), Some(c));
        }
    }
}
