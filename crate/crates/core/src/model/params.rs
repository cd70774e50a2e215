use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// A named parameter array. Batch-norm running statistics are stored as
/// non-trainable parameters so they travel with checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub values: Vec<f32>,
    pub trainable: bool,
    /// Included in the L2 penalty (conv and dense weights).
    pub decayable: bool,
    /// Multiplier on the optimizer learning rate.
    pub lr_scale: f32,
}

impl Parameter {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: Parameter) -> Result<usize> {
        if p.values.len() != p.shape.iter().product::<usize>() {
            return Err(ModelError::Param(format!("{}: {} values for shape {:?}", p.name, p.values.len(), p.shape)));
        }
        if self.index.contains_key(&p.name) {
            return Err(ModelError::Param(format!("duplicate parameter name {}", p.name)));
        }
        let id = self.params.len();
        self.index.insert(p.name.clone(), id);
        self.params.push(p);
        Ok(id)
    }

    pub fn get(&self, id: usize) -> &Parameter {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Parameter {
        &mut self.params[id]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|i| &self.params[i])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Parameter ids ordered by name.
    pub fn sorted_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.params.len()).collect();
        ids.sort_by(|&a, &b| self.params[a].name.cmp(&self.params[b].name));
        ids
    }

    pub fn n_trainable_values(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(Parameter::len).sum()
    }
}

pub(crate) fn he_normal<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, n: usize) -> Vec<f32> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..n).map(|_| normal.sample(rng) as f32).collect()
}
