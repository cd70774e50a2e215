//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! Feature maps use the channels-last layout `[batch, 1, width, channel]`.
//! Every op is generic over [`Scalar`] so the same code path trains in `f32`
//! and is verified against central finite differences in `f64`.

mod gradcheck;
pub mod ops;
mod tensor;

use std::cell::RefCell;
use std::fmt::Debug;
use std::iter::Sum;

pub use gradcheck::{grad_check, GradCheckReport};
pub use tensor::Tensor;

/// Floating point element type of a [`Tensor`].
pub trait Scalar: num_traits::Float + Debug + Default + Sum + Send + Sync + 'static {
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutogradError {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("grad_check requires a scalar-valued function, got {0} outputs")]
    NonScalar(usize),
}

pub type Result<T> = std::result::Result<T, AutogradError>;

pub(crate) fn shape_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(AutogradError::Shape {
        op,
        detail: detail.into(),
    })
}

// Non-differentiable points (ReLU sign changes, max-pool argmax switches,
// exact max ties) are fingerprinted while a gradient check is running so
// finite differences straddling a kink can be told apart from real errors.
thread_local! {
    static KINKS: RefCell<Option<KinkLog>> = const { RefCell::new(None) };
}

#[derive(Default, Clone, PartialEq, Debug)]
pub(crate) struct KinkLog {
    pub signature: Vec<u64>,
    pub ties: bool,
}

pub(crate) fn kinks_enabled() -> bool {
    KINKS.with(|k| k.borrow().is_some())
}

pub(crate) fn record_kink(signature: u64, tie: bool) {
    KINKS.with(|k| {
        if let Some(log) = k.borrow_mut().as_mut() {
            log.signature.push(signature);
            log.ties |= tie;
        }
    });
}

pub(crate) fn with_kink_log<R>(f: impl FnOnce() -> R) -> (R, KinkLog) {
    let previous = KINKS.with(|k| k.borrow_mut().replace(KinkLog::default()));
    let out = f();
    let log = KINKS.with(|k| {
        let mut slot = k.borrow_mut();
        let log = slot.take().unwrap_or_default();
        *slot = previous;
        log
    });
    (out, log)
}
