//! Building blocks of the information-based channel gate: a per-channel
//! softmax over spatial positions, the entropy of each channel's resulting
//! distribution, and the broadcast channel scaling.

use crate::autograd::{shape_err, Result, Scalar, Tensor};

/// Smallest probability fed to the logarithm in [`entropy_reduce`].
pub const ENTROPY_CLAMP: f64 = 1e-12;

fn feature_map_dims(op: &'static str, shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() != 4 || shape[1] != 1 {
        return shape_err(op, format!("expected [B,1,W,C], got {shape:?}"));
    }
    Ok((shape[0], shape[2], shape[3]))
}

/// Softmax across the `W·H` positions of every (sample, channel) slice.
pub fn softmax_spatial<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, width, ch) = feature_map_dims("softmax_spatial", x.shape())?;
    let xd = x.data();
    let mut out = vec![T::zero(); xd.len()];
    for b in 0..batch {
        let base = b * width * ch;
        for c in 0..ch {
            let idx = |w: usize| base + w * ch + c;
            let max = (0..width).map(|w| xd[idx(w)]).fold(T::neg_infinity(), T::max);
            let mut denom = 0f64;
            for w in 0..width {
                let e = (xd[idx(w)] - max).exp();
                out[idx(w)] = e;
                denom += e.as_f64();
            }
            let inv = 1.0 / denom;
            for w in 0..width {
                out[idx(w)] = T::of_f64(out[idx(w)].as_f64() * inv);
            }
        }
    }
    let s = out.clone();
    Ok(Tensor::from_op("softmax_spatial", x.shape().to_vec(), out, vec![x.clone()], move |g| {
        let mut gx = vec![T::zero(); s.len()];
        for b in 0..batch {
            let base = b * width * ch;
            for c in 0..ch {
                let idx = |w: usize| base + w * ch + c;
                let dot: f64 = (0..width).map(|w| g[idx(w)].as_f64() * s[idx(w)].as_f64()).sum();
                for w in 0..width {
                    let i = idx(w);
                    gx[i] = T::of_f64(s[i].as_f64() * (g[i].as_f64() - dot));
                }
            }
        }
        vec![Some(gx)]
    }))
}

/// Shannon entropy (nats) of each channel's spatial distribution:
/// `[B,1,W,C] -> [B,C]`, with `0 · ln 0 = 0`.
pub fn entropy_reduce<T: Scalar>(m: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, width, ch) = feature_map_dims("entropy_reduce", m.shape())?;
    let md = m.data();
    let mut out = vec![T::zero(); batch * ch];
    for b in 0..batch {
        for c in 0..ch {
            let h: f64 = (0..width)
                .map(|w| {
                    let p = md[(b * width + w) * ch + c].as_f64();
                    if p > 0.0 {
                        -p * p.max(ENTROPY_CLAMP).ln()
                    } else {
                        0.0
                    }
                })
                .sum();
            out[b * ch + c] = T::of_f64(h);
        }
    }
    let mc = m.clone();
    Ok(Tensor::from_op("entropy_reduce", vec![batch, ch], out, vec![m.clone()], move |g| {
        let md = mc.data();
        let mut gm = vec![T::zero(); md.len()];
        for b in 0..batch {
            for c in 0..ch {
                let gv = g[b * ch + c].as_f64();
                for w in 0..width {
                    let i = (b * width + w) * ch + c;
                    let p = md[i].as_f64().max(ENTROPY_CLAMP);
                    gm[i] = T::of_f64(-(1.0 + p.ln()) * gv);
                }
            }
        }
        vec![Some(gm)]
    }))
}

/// `out[b,0,w,c] = u[b,0,w,c] · p[b,c]`.
pub fn scale_channels<T: Scalar>(u: &Tensor<T>, p: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, width, ch) = feature_map_dims("scale_channels", u.shape())?;
    if p.shape() != [batch, ch] {
        return shape_err("scale_channels", format!("gate {:?} for map {:?}", p.shape(), u.shape()));
    }
    let (ud, pd) = (u.data(), p.data());
    let mut out = vec![T::zero(); ud.len()];
    for b in 0..batch {
        let gate = &pd[b * ch..][..ch];
        for w in 0..width {
            let o = (b * width + w) * ch;
            for c in 0..ch {
                out[o + c] = ud[o + c] * gate[c];
            }
        }
    }
    let (uc, pc) = (u.clone(), p.clone());
    let (need_u, need_p) = (u.requires_grad(), p.requires_grad());
    Ok(Tensor::from_op(
        "scale_channels",
        u.shape().to_vec(),
        out,
        vec![u.clone(), p.clone()],
        move |g| {
            let (ud, pd) = (uc.data(), pc.data());
            let mut gu = need_u.then(|| vec![T::zero(); ud.len()]);
            let mut gp = need_p.then(|| vec![T::zero(); pd.len()]);
            for b in 0..batch {
                for w in 0..width {
                    let o = (b * width + w) * ch;
                    for c in 0..ch {
                        if let Some(gu) = gu.as_mut() {
                            gu[o + c] = g[o + c] * pd[b * ch + c];
                        }
                        if let Some(gp) = gp.as_mut() {
                            gp[b * ch + c] = gp[b * ch + c] + g[o + c] * ud[o + c];
                        }
                    }
                }
            }
            vec![gu, gp]
        },
    ))
}

/// Mean over the width axis: `[B,1,W,C] -> [B,C]`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, width, ch) = feature_map_dims("global_avg_pool", x.shape())?;
    let xd = x.data();
    let mut out = vec![T::zero(); batch * ch];
    for b in 0..batch {
        for c in 0..ch {
            let s: f64 = (0..width).map(|w| xd[(b * width + w) * ch + c].as_f64()).sum();
            out[b * ch + c] = T::of_f64(s / width as f64);
        }
    }
    let scale = T::of_f64(1.0 / width as f64);
    Ok(Tensor::from_op("global_avg_pool", vec![batch, ch], out, vec![x.clone()], move |g| {
        let mut gx = vec![T::zero(); batch * width * ch];
        for b in 0..batch {
            for w in 0..width {
                for c in 0..ch {
                    gx[(b * width + w) * ch + c] = g[b * ch + c] * scale;
                }
            }
        }
        vec![Some(gx)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_channel_softmax() {
        let x = Tensor::<f64>::full(&[1, 1, 8, 1], 0.3);
        let m = softmax_spatial(&x).unwrap();
        assert!(m.data().iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn softmax_of_zero_and_ln2() {
        let x = Tensor::<f64>::new(&[1, 1, 2, 1], vec![0.0, 2f64.ln()]);
        let m = softmax_spatial(&x).unwrap();
        assert!((m.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.data()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_reference_values() {
        let uniform = Tensor::<f64>::full(&[1, 1, 16, 1], 1.0 / 16.0);
        assert!((entropy_reduce(&uniform).unwrap().item() - 16f64.ln()).abs() < 1e-12);
        let one_hot = Tensor::<f64>::new(&[1, 1, 3, 1], vec![0.0, 1.0, 0.0]);
        assert_eq!(entropy_reduce(&one_hot).unwrap().item(), 0.0);
        let p = Tensor::<f64>::new(&[1, 1, 2, 1], vec![1.0 / 3.0, 2.0 / 3.0]);
        let expected = -(1.0 / 3.0f64) * (1.0 / 3.0f64).ln() - (2.0 / 3.0f64) * (2.0 / 3.0f64).ln();
        let h = entropy_reduce(&p).unwrap().item();
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.6365).abs() < 1e-4);
    }

    #[test]
    fn scale_by_ones_and_zero_channel() {
        let u = Tensor::<f32>::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let ones = Tensor::full(&[1, 2], 1.0);
        assert_eq!(scale_channels(&u, &ones).unwrap().data(), u.data());
        let p = Tensor::new(&[1, 2], vec![1.0, 0.0]);
        assert_eq!(scale_channels(&u, &p).unwrap().data(), &[1.0, 0.0, 3.0, 0.0]);
        assert!(scale_channels(&u, &Tensor::full(&[1, 3], 1.0)).is_err());
    }

    #[test]
    fn pooling_constant_map() {
        let x = Tensor::<f32>::full(&[2, 1, 5, 3], 0.75);
        let y = global_avg_pool(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.data().iter().all(|&v| (v - 0.75).abs() < 1e-7));
    }
}
