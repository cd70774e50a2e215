use crate::autograd::{shape_err, Result, Scalar, Tensor};

/// Output width and left padding of a SAME-padded window op. The extra
/// pad sample (odd total) goes on the right.
pub fn same_padding(width: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = width.div_ceil(stride);
    let total = ((out.saturating_sub(1)) * stride + kernel).saturating_sub(width);
    (out, total / 2)
}

/// 1-D cross-correlation with SAME zero padding.
///
/// `x` is `[B, 1, W, Cin]`, `kernel` is `[1, k, Cin, Cout]`; the result is
/// `[B, 1, ceil(W / stride), Cout]`.
pub fn conv1d<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    let (xs, ks) = (x.shape(), kernel.shape());
    if xs.len() != 4 || xs[1] != 1 {
        return shape_err("conv1d", format!("input must be [B,1,W,C], got {xs:?}"));
    }
    if ks.len() != 4 || ks[0] != 1 {
        return shape_err("conv1d", format!("kernel must be [1,k,Cin,Cout], got {ks:?}"));
    }
    if ks[2] != xs[3] {
        return shape_err("conv1d", format!("kernel expects {} input channels, input has {}", ks[2], xs[3]));
    }
    if stride == 0 {
        return shape_err("conv1d", "stride must be positive");
    }
    let (batch, width, cin) = (xs[0], xs[2], xs[3]);
    let (k, cout) = (ks[1], ks[3]);
    let (out_w, pad) = same_padding(width, k, stride);

    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![T::zero(); batch * out_w * cout];
    for b in 0..batch {
        for ow in 0..out_w {
            let orow = &mut out[(b * out_w + ow) * cout..][..cout];
            for kk in 0..k {
                let Some(iw) = (ow * stride + kk).checked_sub(pad).filter(|&i| i < width) else {
                    continue;
                };
                let xrow = &xd[(b * width + iw) * cin..][..cin];
                for (ci, &xv) in xrow.iter().enumerate() {
                    let wrow = &kd[(kk * cin + ci) * cout..][..cout];
                    for (o, &w) in orow.iter_mut().zip(wrow) {
                        *o = *o + xv * w;
                    }
                }
            }
        }
    }

    let (xc, kc) = (x.clone(), kernel.clone());
    let need_x = x.requires_grad();
    let need_k = kernel.requires_grad();
    Ok(Tensor::from_op(
        "conv1d",
        vec![batch, 1, out_w, cout],
        out,
        vec![x.clone(), kernel.clone()],
        move |g| {
            let (xd, kd) = (xc.data(), kc.data());
            let mut gx = need_x.then(|| vec![T::zero(); xd.len()]);
            let mut gk = need_k.then(|| vec![T::zero(); kd.len()]);
            for b in 0..batch {
                for ow in 0..out_w {
                    let grow = &g[(b * out_w + ow) * cout..][..cout];
                    for kk in 0..k {
                        let Some(iw) = (ow * stride + kk).checked_sub(pad).filter(|&i| i < width) else {
                            continue;
                        };
                        let xoff = (b * width + iw) * cin;
                        for ci in 0..cin {
                            let woff = (kk * cin + ci) * cout;
                            if let Some(gx) = gx.as_mut() {
                                let wrow = &kd[woff..][..cout];
                                let s = wrow.iter().zip(grow).fold(T::zero(), |acc, (&w, &gv)| acc + w * gv);
                                gx[xoff + ci] = gx[xoff + ci] + s;
                            }
                            if let Some(gk) = gk.as_mut() {
                                let xv = xd[xoff + ci];
                                for (w, &gv) in gk[woff..][..cout].iter_mut().zip(grow) {
                                    *w = *w + xv * gv;
                                }
                            }
                        }
                    }
                }
            }
            vec![gx, gk]
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_hits_backbone_widths() {
        assert_eq!(same_padding(512, 4, 2), (256, 1));
        assert_eq!(same_padding(256, 3, 2), (128, 0));
        assert_eq!(same_padding(128, 3, 2), (64, 0));
        assert_eq!(same_padding(3, 2, 1), (3, 0));
        assert_eq!(same_padding(7, 1, 1), (7, 0));
    }

    #[test]
    fn unit_kernel_is_identity() {
        let x = Tensor::<f32>::new(&[1, 1, 4, 1], vec![1.0, -2.0, 3.5, 0.25]);
        let k = Tensor::new(&[1, 1, 1, 1], vec![1.0]);
        let y = conv1d(&x, &k, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn right_padding_convention() {
        let x = Tensor::<f32>::new(&[1, 1, 3, 1], vec![1.0, 2.0, 3.0]);
        let k = Tensor::new(&[1, 2, 1, 1], vec![1.0, 0.0]);
        let y = conv1d(&x, &k, 1).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn direct_summation_oracle() {
        // stride 2, k = 3, two input and two output channels
        let x: Vec<f64> = (0..10).map(|i| (i as f64) * 0.5 - 2.0).collect();
        let w: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let xt = Tensor::new(&[1, 1, 5, 2], x.clone());
        let kt = Tensor::new(&[1, 3, 2, 2], w.clone());
        let y = conv1d(&xt, &kt, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 2]);
        let (out_w, pad) = same_padding(5, 3, 2);
        for ow in 0..out_w {
            for co in 0..2 {
                let mut s = 0.0;
                for kk in 0..3 {
                    let iw = (ow * 2 + kk) as isize - pad as isize;
                    if !(0..5).contains(&iw) {
                        continue;
                    }
                    for ci in 0..2 {
                        s += x[iw as usize * 2 + ci] * w[(kk * 2 + ci) * 2 + co];
                    }
                }
                assert!((y.data()[ow * 2 + co] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let x = Tensor::<f32>::zeros(&[1, 1, 4, 2]);
        let k = Tensor::zeros(&[1, 3, 3, 4]);
        assert!(conv1d(&x, &k, 1).is_err());
    }
}
