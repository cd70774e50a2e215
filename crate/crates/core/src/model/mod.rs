//! Pre-activation bottleneck ResNets for beat classification, with
//! optional entropy-driven channel gates (ISE blocks).

mod ctx;
mod ise;
mod network;
mod params;
mod truncate;

use serde::{Deserialize, Serialize};

use crate::autograd::AutogradError;
pub use crate::beats::LeadMode;

pub use ctx::{Capture, ForwardCtx, Mode};
pub use ise::{ise_block, ise_hidden_width, IseOutput};
pub use network::{BlockSummary, Network, UnitDef, BN_EPS, BN_MOMENTUM};
pub use params::{ParamStore, Parameter};
pub use truncate::{truncate_and_head, HeadInit};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Where the channel gate sits inside each residual unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attention {
    None,
    /// Gate the residual branch output before the addition.
    IseStandard,
    /// Gate the (pre-activated) unit input on the residual branch only.
    IsePre,
    /// Gate the shortcut branch.
    IseIdentity,
}

impl Attention {
    pub fn as_str(self) -> &'static str {
        match self {
            Attention::None => "none",
            Attention::IseStandard => "ise_standard",
            Attention::IsePre => "ise_pre",
            Attention::IseIdentity => "ise_identity",
        }
    }
}

impl std::str::FromStr for Attention {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Attention::None),
            "ise_standard" | "ise" | "standard" => Ok(Attention::IseStandard),
            "ise_pre" | "pre" => Ok(Attention::IsePre),
            "ise_identity" | "identity" => Ok(Attention::IseIdentity),
            _ => Err(ModelError::Spec(format!("unknown attention {s:?}"))),
        }
    }
}

/// Bottleneck width `c` of each block; a unit maps to `2c` channels.
pub const BLOCK_WIDTHS: [usize; 4] = [8, 16, 32, 64];
pub const SUPPORTED_DEPTHS: [u32; 6] = [11, 14, 17, 20, 23, 26];
pub const INPUT_WIDTH: usize = 512;

/// Units per block for a nominal depth. Depth 11 has no fourth block.
pub fn block_multipliers(depth: u32) -> Result<[usize; 4]> {
    Ok(match depth {
        11 => [1, 1, 1, 0],
        14 => [1, 1, 1, 1],
        17 => [1, 1, 2, 1],
        20 => [1, 2, 2, 1],
        23 => [1, 2, 2, 2],
        26 => [1, 2, 3, 2],
        _ => return Err(ModelError::Spec(format!("depth {depth} is not one of {SUPPORTED_DEPTHS:?}"))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub depth: u32,
    pub lead_mode: LeadMode,
    pub attention: Attention,
    pub n_classes: usize,
    pub l2_lambda: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            depth: 14,
            lead_mode: LeadMode::Both,
            attention: Attention::IseStandard,
            n_classes: 5,
            l2_lambda: 1e-4,
            seed: 0,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        block_multipliers(self.depth)?;
        if self.n_classes < 2 {
            return Err(ModelError::Spec(format!("n_classes must be at least 2, got {}", self.n_classes)));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(ModelError::Spec(format!("l2_lambda must be non-negative, got {}", self.l2_lambda)));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        let prefix = if self.attention == Attention::None { "ResNet" } else { "ISEnet" };
        format!("{prefix}-{}", self.depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multipliers_add_up_to_depth() {
        for d in SUPPORTED_DEPTHS {
            let units: usize = block_multipliers(d).unwrap().iter().sum();
            assert_eq!(1 + 3 * units + 1, d as usize);
        }
        assert!(block_multipliers(12).is_err());
    }

    #[test]
    fn attention_names_round_trip() {
        for a in [Attention::None, Attention::IseStandard, Attention::IsePre, Attention::IseIdentity] {
            assert_eq!(a.as_str().parse::<Attention>().unwrap(), a);
        }
    }
}
