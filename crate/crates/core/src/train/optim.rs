use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Result, TrainError};
use crate::model::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentumConfig {
    pub mu: f64,
    pub nesterov: bool,
}

impl Default for MomentumConfig {
    fn default() -> Self {
        MomentumConfig { mu: 0.9, nesterov: false }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(w: &mut [f32], g: &[f32], m: &mut [f64], v: &mut [f64], t: u64, lr: f64, cfg: &AdamConfig) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..w.len() {
        let gi = f64::from(g[i]);
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        let step = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
        w[i] = (f64::from(w[i]) - step) as f32;
    }
}

/// `v <- mu v + g; w <- w - lr v` (Nesterov: `w <- w - lr (g + mu v)`).
pub fn momentum_step(w: &mut [f32], g: &[f32], vel: &mut [f64], lr: f64, cfg: &MomentumConfig) {
    for i in 0..w.len() {
        let gi = f64::from(g[i]);
        vel[i] = cfg.mu * vel[i] + gi;
        let dir = if cfg.nesterov { gi + cfg.mu * vel[i] } else { vel[i] };
        w[i] = (f64::from(w[i]) - lr * dir) as f32;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub first: Vec<f64>,
    /// Adam second moment; empty for momentum.
    pub second: Vec<f64>,
}

/// Optimizer moments keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub adam: AdamConfig,
    pub momentum: MomentumConfig,
    pub step: u64,
    pub slots: Vec<Slot>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, adam: AdamConfig, momentum: MomentumConfig, params: &ParamStore) -> Self {
        let slots = params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| Slot {
                name: p.name.clone(),
                first: vec![0.0; p.len()],
                second: if kind == OptimizerKind::Adam { vec![0.0; p.len()] } else { Vec::new() },
            })
            .collect();
        let mut s = OptimizerState {
            kind,
            adam,
            momentum,
            step: 0,
            slots,
            index: HashMap::new(),
        };
        s.reindex();
        s
    }

    pub fn reindex(&mut self) {
        self.index = self.slots.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
    }

    /// Applies one update. `grads` pairs parameter ids with gradients; the
    /// effective rate of each parameter is `lr * lr_scale`.
    pub fn apply(&mut self, params: &mut ParamStore, grads: &[(usize, Vec<f32>)], lr: f64) -> Result<()> {
        self.step += 1;
        for (id, g) in grads {
            let p = params.get_mut(*id);
            let &slot_id = self
                .index
                .get(&p.name)
                .ok_or_else(|| TrainError::Config(format!("no optimizer slot for {}", p.name)))?;
            let slot = &mut self.slots[slot_id];
            if slot.first.len() != p.values.len() || g.len() != p.values.len() {
                return Err(TrainError::Config(format!("gradient size mismatch for {}", p.name)));
            }
            let lr = lr * f64::from(p.lr_scale);
            match self.kind {
                OptimizerKind::Adam => adam_step(&mut p.values, g, &mut slot.first, &mut slot.second, self.step, lr, &self.adam),
                OptimizerKind::Momentum => momentum_step(&mut p.values, g, &mut slot.first, lr, &self.momentum),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let (mut w, mut m, mut v) = ([1.0f32], [0.0], [0.0]);
        adam_step(&mut w, &[1.0], &mut m, &mut v, 1, 0.1, &AdamConfig::default());
        assert!((w[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut w, mut m, mut v) = ([0.3f32, -2.0], [0.0; 2], [0.0; 2]);
        adam_step(&mut w, &[0.0, 0.0], &mut m, &mut v, 1, 0.1, &AdamConfig::default());
        assert_eq!(w, [0.3, -2.0]);
        let mut vel = [0.0; 2];
        momentum_step(&mut w, &[0.0, 0.0], &mut vel, 0.1, &MomentumConfig::default());
        assert_eq!(w, [0.3, -2.0]);
    }

    #[test]
    fn momentum_velocity_is_geometric() {
        let (mut w, mut vel) = ([0.0f32], [0.0]);
        for k in 1..=50 {
            momentum_step(&mut w, &[1.0], &mut vel, 0.0, &MomentumConfig::default());
            let expected = (1.0 - 0.9f64.powi(k)) / 0.1;
            assert!((vel[0] - expected).abs() < 1e-12);
        }
    }
}
