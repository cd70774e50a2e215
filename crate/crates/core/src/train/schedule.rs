use serde::{Deserialize, Serialize};

use super::{Result, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `base * decay^epoch`.
    Exponential { decay: f64 },
    /// `rates[i]` while `boundaries[i-1] <= epoch < boundaries[i]`.
    Piecewise { rates: Vec<f64>, boundaries: Vec<usize> },
}

impl Schedule {
    pub fn exponential() -> Self {
        Schedule::Exponential { decay: 0.97 }
    }

    pub fn piecewise() -> Self {
        Schedule::Piecewise {
            rates: vec![1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6],
            boundaries: vec![3, 10, 20, 40, 80, 160],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Exponential { decay } if !(*decay > 0.0 && *decay <= 1.0) => {
                Err(TrainError::Config(format!("exponential decay {decay} outside (0, 1]")))
            }
            Schedule::Piecewise { rates, boundaries } if rates.len() != boundaries.len() + 1 => Err(TrainError::Config(format!(
                "piecewise schedule needs one more rate than boundaries ({} vs {})",
                rates.len(),
                boundaries.len()
            ))),
            Schedule::Piecewise { boundaries, .. } if boundaries.windows(2).any(|w| w[0] >= w[1]) => {
                Err(TrainError::Config("piecewise boundaries must increase".into()))
            }
            _ => Ok(()),
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::piecewise()
    }
}

/// Learning rate for a 0-based epoch. Piecewise rates are absolute and
/// ignore `base_lr`.
pub fn lr_at(schedule: &Schedule, epoch: usize, base_lr: f64) -> f64 {
    match schedule {
        Schedule::Exponential { decay } => base_lr * decay.powi(epoch as i32),
        Schedule::Piecewise { rates, boundaries } => rates[boundaries.iter().take_while(|&&b| epoch >= b).count()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_values() {
        let s = Schedule::exponential();
        assert_eq!(lr_at(&s, 0, 0.01), 0.01);
        assert!((lr_at(&s, 2, 0.01) - 0.01 * 0.9409).abs() < 1e-15);
    }

    #[test]
    fn piecewise_buckets() {
        let s = Schedule::piecewise();
        let got: Vec<f64> = [0, 2, 3, 5, 9, 10, 19, 20, 40, 80, 159, 160, 1000].iter().map(|&e| lr_at(&s, e, 0.0)).collect();
        assert_eq!(got, vec![1e-3, 1e-3, 5e-4, 5e-4, 5e-4, 1e-4, 1e-4, 5e-5, 1e-5, 5e-6, 5e-6, 1e-6, 1e-6]);
    }

    #[test]
    fn invalid_lists() {
        let bad = Schedule::Piecewise {
            rates: vec![1.0],
            boundaries: vec![3],
        };
        assert!(bad.validate().is_err());
        assert!(Schedule::piecewise().validate().is_ok());
    }
}
