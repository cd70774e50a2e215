use std::hash::{Hash, Hasher};

use super::conv::same_padding;
use crate::autograd::{kinks_enabled, record_kink, shape_err, Result, Scalar, Tensor};

/// Windowed max over the width axis with SAME padding. Padded positions
/// never win. The gradient goes to the first maximal element per window.
pub fn maxpool1d<T: Scalar>(x: &Tensor<T>, k: usize, stride: usize) -> Result<Tensor<T>> {
    let xs = x.shape();
    if xs.len() != 4 || xs[1] != 1 || xs[2] == 0 {
        return shape_err("maxpool1d", format!("input must be [B,1,W>=1,C], got {xs:?}"));
    }
    if k == 0 || stride == 0 {
        return shape_err("maxpool1d", "kernel and stride must be positive");
    }
    let (batch, width, ch) = (xs[0], xs[2], xs[3]);
    let (out_w, pad) = same_padding(width, k, stride);
    let xd = x.data();

    let mut out = vec![T::zero(); batch * out_w * ch];
    let mut argmax = vec![0usize; out.len()];
    let mut tie = false;
    for b in 0..batch {
        for ow in 0..out_w {
            let lo = (ow * stride).saturating_sub(pad);
            let hi = (ow * stride + k).saturating_sub(pad).min(width);
            for c in 0..ch {
                let mut best = lo;
                let mut best_v = xd[(b * width + lo) * ch + c];
                for iw in lo + 1..hi {
                    let v = xd[(b * width + iw) * ch + c];
                    if v > best_v {
                        best_v = v;
                        best = iw;
                    } else if v == best_v {
                        tie = true;
                    }
                }
                let o = (b * out_w + ow) * ch + c;
                out[o] = best_v;
                argmax[o] = (b * width + best) * ch + c;
            }
        }
    }

    if kinks_enabled() {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        argmax.hash(&mut h);
        record_kink(h.finish(), tie);
    }

    let n_in = xd.len();
    Ok(Tensor::from_op("maxpool1d", vec![batch, 1, out_w, ch], out, vec![x.clone()], move |g| {
        let mut gx = vec![T::zero(); n_in];
        for (&src, &gv) in argmax.iter().zip(g) {
            gx[src] = gx[src] + gv;
        }
        vec![Some(gx)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_oracle() {
        let x = Tensor::<f32>::new(&[1, 1, 4, 1], vec![1.0, 3.0, 2.0, 5.0]);
        let y = maxpool1d(&x, 3, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn constant_in_constant_out() {
        let x = Tensor::<f32>::full(&[2, 1, 9, 3], 1.5);
        let y = maxpool1d(&x, 3, 2).unwrap();
        assert_eq!(y.shape(), &[2, 1, 5, 3]);
        assert!(y.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn tie_routes_to_first_max() {
        let x = Tensor::<f64>::leaf(&[1, 1, 3, 1], vec![2.0, 2.0, 1.0]);
        let y = maxpool1d(&x, 3, 3).unwrap();
        y.backward_with(vec![1.0]);
        assert_eq!(x.grad().unwrap(), vec![1.0, 0.0, 0.0]);
    }
}
