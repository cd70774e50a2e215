use crate::autograd::{shape_err, Result, Scalar, Tensor};

/// Output of a training-mode batch norm: the normalized tensor plus the
/// per-channel batch statistics used to update running averages.
pub struct BatchNormOutput<T: Scalar> {
    pub output: Tensor<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

fn check<T: Scalar>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<usize> {
    let ch = *x.shape().last().unwrap_or(&0);
    if ch == 0 || gamma.len() != ch || beta.len() != ch {
        return shape_err(
            "batchnorm",
            format!("channels {ch} vs gamma {} / beta {}", gamma.len(), beta.len()),
        );
    }
    Ok(ch)
}

/// Batch norm over every axis except the last (channel) axis, using the
/// biased batch variance.
pub fn batchnorm_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<BatchNormOutput<T>> {
    let ch = check(x, gamma, beta)?;
    let xd = x.data();
    let n = xd.len() / ch;
    if n == 0 {
        return shape_err("batchnorm", "empty batch");
    }

    let mut mean = vec![0f64; ch];
    for row in xd.chunks_exact(ch) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0f64; ch];
    for row in xd.chunks_exact(ch) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v.as_f64() - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n as f64);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let (gd, bd) = (gamma.data(), beta.data());
    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = vec![T::zero(); xd.len()];
    for ((xr, hr), or) in xd.chunks_exact(ch).zip(xhat.chunks_exact_mut(ch)).zip(out.chunks_exact_mut(ch)) {
        for c in 0..ch {
            let h = T::of_f64((xr[c].as_f64() - mean[c]) * inv_std[c]);
            hr[c] = h;
            or[c] = gd[c] * h + bd[c];
        }
    }

    let gamma_c = gamma.clone();
    let output = Tensor::from_op(
        "batchnorm",
        x.shape().to_vec(),
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        move |g| {
            let gd = gamma_c.data();
            let mut sum_g = vec![0f64; ch];
            let mut sum_gh = vec![0f64; ch];
            for (gr, hr) in g.chunks_exact(ch).zip(xhat.chunks_exact(ch)) {
                for c in 0..ch {
                    sum_g[c] += gr[c].as_f64();
                    sum_gh[c] += gr[c].as_f64() * hr[c].as_f64();
                }
            }
            let nf = n as f64;
            let mut gx = vec![T::zero(); g.len()];
            for ((xr, gr), hr) in gx.chunks_exact_mut(ch).zip(g.chunks_exact(ch)).zip(xhat.chunks_exact(ch)) {
                for c in 0..ch {
                    let gam = gd[c].as_f64();
                    let v = gam * inv_std[c] / nf
                        * (nf * gr[c].as_f64() - sum_g[c] - hr[c].as_f64() * sum_gh[c]);
                    xr[c] = T::of_f64(v);
                }
            }
            let ggamma = sum_gh.iter().map(|&v| T::of_f64(v)).collect();
            let gbeta = sum_g.iter().map(|&v| T::of_f64(v)).collect();
            vec![Some(gx), Some(ggamma), Some(gbeta)]
        },
    );
    Ok(BatchNormOutput {
        output,
        mean: mean.into_iter().map(T::of_f64).collect(),
        var: var.into_iter().map(T::of_f64).collect(),
    })
}

/// Batch norm with fixed (running) statistics.
pub fn batchnorm_infer<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mean: &[T],
    var: &[T],
    eps: f64,
) -> Result<Tensor<T>> {
    let ch = check(x, gamma, beta)?;
    if mean.len() != ch || var.len() != ch {
        return shape_err("batchnorm", "running statistics do not match channel count");
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::of_f64(1.0 / (v.as_f64() + eps).sqrt())).collect();
    let xd = x.data();
    let (gd, bd) = (gamma.data(), beta.data());
    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = vec![T::zero(); xd.len()];
    for ((xr, hr), or) in xd.chunks_exact(ch).zip(xhat.chunks_exact_mut(ch)).zip(out.chunks_exact_mut(ch)) {
        for c in 0..ch {
            let h = (xr[c] - mean[c]) * inv_std[c];
            hr[c] = h;
            or[c] = gd[c] * h + bd[c];
        }
    }
    let gamma_c = gamma.clone();
    Ok(Tensor::from_op(
        "batchnorm",
        x.shape().to_vec(),
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        move |g| {
            let gd = gamma_c.data();
            let mut gx = vec![T::zero(); g.len()];
            let mut ggamma = vec![T::zero(); ch];
            let mut gbeta = vec![T::zero(); ch];
            for ((xr, gr), hr) in gx.chunks_exact_mut(ch).zip(g.chunks_exact(ch)).zip(xhat.chunks_exact(ch)) {
                for c in 0..ch {
                    xr[c] = gr[c] * gd[c] * inv_std[c];
                    ggamma[c] = ggamma[c] + gr[c] * hr[c];
                    gbeta[c] = gbeta[c] + gr[c];
                }
            }
            vec![Some(gx), Some(ggamma), Some(gbeta)]
        },
    ))
}
