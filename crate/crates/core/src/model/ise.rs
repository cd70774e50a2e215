use crate::autograd::ops::{dense, entropy_reduce, mul_scalar, relu, scale_channels, sigmoid, softmax_spatial};
use crate::autograd::{Scalar, Tensor};

use super::Result;

/// Reduction ratio `r` and hidden width `n = max(floor(C / r), 1)` of the
/// gate calibrator: `r = 2` for `C <= 8`, else `8`.
pub fn ise_hidden_width(channels: usize) -> (usize, usize) {
    let r = if channels <= 8 { 2 } else { 8 };
    (r, (channels / r).max(1))
}

pub struct IseOutput<T: Scalar> {
    /// `u` scaled per channel by the gate.
    pub output: Tensor<T>,
    /// Gate values `[B, C]`, each in (0, 1).
    pub gates: Tensor<T>,
}

/// Spatial softmax per channel, entropy of each channel distribution
/// scaled by `1 / ln W`, a two-layer calibrator (ReLU, then sigmoid) and a
/// channel-wise rescale of `u`.
///
/// At `W = 1` the entropy is identically zero and the gate is a learned
/// constant.
pub fn ise_block<T: Scalar>(
    u: &Tensor<T>,
    w1: &Tensor<T>,
    b1: &Tensor<T>,
    w2: &Tensor<T>,
    b2: &Tensor<T>,
    gate_override: Option<T>,
) -> Result<IseOutput<T>> {
    let width = u.shape().get(2).copied().unwrap_or(1);
    let m = softmax_spatial(u)?;
    let h = entropy_reduce(&m)?;
    let scale = if width > 1 { 1.0 / (width as f64).ln() } else { 0.0 };
    let n = mul_scalar(&h, T::of_f64(scale));
    let hidden = relu(&dense(&n, w1, b1)?);
    let mut gates = sigmoid(&dense(&hidden, w2, b2)?);
    if let Some(v) = gate_override {
        gates = Tensor::full(gates.shape(), v);
    }
    let output = scale_channels(u, &gates)?;
    Ok(IseOutput { output, gates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_widths() {
        assert_eq!(ise_hidden_width(8), (2, 4));
        assert_eq!(ise_hidden_width(16), (8, 2));
        assert_eq!(ise_hidden_width(32), (8, 4));
        assert_eq!(ise_hidden_width(64), (8, 8));
        assert_eq!(ise_hidden_width(128), (8, 16));
        assert_eq!(ise_hidden_width(1), (2, 1));
    }

    fn zeros(shape: &[usize]) -> Tensor<f64> {
        Tensor::zeros(shape)
    }

    #[test]
    fn zero_calibrator_gates_at_one_half() {
        let (c, n) = (4, 2);
        let u = Tensor::new(&[2, 1, 8, c], (0..64).map(|i| (i as f64 * 0.37).sin()).collect());
        let out = ise_block(&u, &zeros(&[c, n]), &zeros(&[n]), &zeros(&[n, c]), &zeros(&[c]), None).unwrap();
        assert!(out.gates.data().iter().all(|g| *g == 0.5));
        for (o, x) in out.output.data().iter().zip(u.data()) {
            assert_eq!(*o, 0.5 * x);
        }
    }

    #[test]
    fn constant_input_gives_equal_gates() {
        let (c, n) = (3, 1);
        let u = Tensor::full(&[1, 1, 16, c], 2.0);
        let w1 = Tensor::new(&[c, n], vec![0.3; c * n]);
        let w2 = Tensor::new(&[n, c], vec![0.7; c * n]);
        let out = ise_block(&u, &w1, &zeros(&[n]), &w2, &zeros(&[c]), None).unwrap();
        let g = out.gates.data();
        assert!(g.iter().all(|v| (v - g[0]).abs() < 1e-15));
    }

    #[test]
    fn width_one_is_a_constant_gate() {
        let (c, n) = (2, 1);
        let u = Tensor::new(&[1, 1, 1, c], vec![1.0, -3.0]);
        let b2 = Tensor::new(&[c], vec![0.0, 1.0]);
        let out = ise_block(&u, &zeros(&[c, n]), &zeros(&[n]), &zeros(&[n, c]), &b2, None).unwrap();
        assert_eq!(out.gates.data()[0], 0.5);
        assert!((out.gates.data()[1] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
    }
}
