use crate::autograd::{Scalar, Tensor};

use super::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; running statistics are collected
    /// for update.
    Train,
    /// Running statistics in batch norm.
    Infer,
}

/// Gate values produced by one ISE site during a forward pass.
#[derive(Debug, Clone)]
pub struct Capture<T: Scalar> {
    /// 1-based block index; 0 for the truncation head.
    pub block: usize,
    /// 1-based unit index within the block.
    pub unit: usize,
    pub channels: usize,
    /// Row-major `[batch, channels]`.
    pub gates: Vec<T>,
}

pub(crate) struct BnUpdate {
    pub mean_id: usize,
    pub var_id: usize,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

/// Per-forward state: parameter leaves, batch-norm statistics collected in
/// train mode, optional gate captures and an optional gate override.
pub struct ForwardCtx<T: Scalar> {
    pub mode: Mode,
    /// Parameters become gradient-tracking leaves when set.
    pub track_grads: bool,
    /// When set, every ISE gate is replaced by this constant.
    pub gate_override: Option<T>,
    captures: Option<Vec<Capture<T>>>,
    bound: Vec<Option<Tensor<T>>>,
    pub(crate) bn_updates: Vec<BnUpdate>,
    pub(crate) stage_shapes: Vec<(String, Vec<usize>)>,
}

impl<T: Scalar> ForwardCtx<T> {
    pub fn new(mode: Mode, track_grads: bool) -> Self {
        ForwardCtx {
            mode,
            track_grads,
            gate_override: None,
            captures: None,
            bound: Vec::new(),
            bn_updates: Vec::new(),
            stage_shapes: Vec::new(),
        }
    }

    pub fn train() -> Self {
        Self::new(Mode::Train, true)
    }

    pub fn infer() -> Self {
        Self::new(Mode::Infer, false)
    }

    /// Starts recording ISE gate values.
    pub fn capture_gates(mut self) -> Self {
        self.captures = Some(Vec::new());
        self
    }

    pub fn with_gate_override(mut self, value: T) -> Self {
        self.gate_override = Some(value);
        self
    }

    pub fn captures(&self) -> &[Capture<T>] {
        self.captures.as_deref().unwrap_or(&[])
    }

    pub fn take_captures(&mut self) -> Vec<Capture<T>> {
        self.captures.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Output shapes of the stem, every block and the pooled features, in
    /// evaluation order.
    pub fn stage_shapes(&self) -> &[(String, Vec<usize>)] {
        &self.stage_shapes
    }

    pub(crate) fn record_capture(&mut self, capture: Capture<T>) {
        if let Some(c) = self.captures.as_mut() {
            c.push(capture);
        }
    }

    pub(crate) fn record_stage(&mut self, name: impl Into<String>, shape: &[usize]) {
        self.stage_shapes.push((name.into(), shape.to_vec()));
    }

    /// The tensor bound to parameter `id`, created on first use.
    pub fn param(&mut self, store: &ParamStore, id: usize) -> Tensor<T> {
        if self.bound.len() <= id {
            self.bound.resize(id + 1, None);
        }
        self.bound[id]
            .get_or_insert_with(|| {
                let p = store.get(id);
                let data: Vec<T> = p.values.iter().map(|v| T::of_f64(f64::from(*v))).collect();
                if self.track_grads && p.trainable {
                    Tensor::leaf(&p.shape, data)
                } else {
                    Tensor::new(&p.shape, data)
                }
            })
            .clone()
    }

    /// Gradients of every bound trainable parameter after `backward`.
    pub fn gradients(&self) -> Vec<(usize, Vec<T>)> {
        self.bound
            .iter()
            .enumerate()
            .filter_map(|(id, t)| {
                let t = t.as_ref()?;
                if !t.requires_grad() {
                    return None;
                }
                Some((id, t.grad().unwrap_or_else(|| vec![T::zero(); t.len()])))
            })
            .collect()
    }
}
