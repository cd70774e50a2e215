use crate::autograd::{shape_err, Result, Scalar, Tensor};

/// Mean softmax cross-entropy of `logits: [B, K]` against class indices.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let s = logits.shape();
    if s.len() != 2 || s[0] != labels.len() || s[0] == 0 {
        return shape_err("softmax_cross_entropy", format!("logits {s:?} for {} labels", labels.len()));
    }
    let (batch, k) = (s[0], s[1]);
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return shape_err("softmax_cross_entropy", format!("label {bad} out of range for {k} classes"));
    }
    let ld = logits.data();
    let mut probs = vec![0f64; ld.len()];
    let mut total = 0f64;
    for (b, (row, prow)) in ld.chunks_exact(k).zip(probs.chunks_exact_mut(k)).enumerate() {
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for (p, &v) in prow.iter_mut().zip(row) {
            *p = (v.as_f64() - max).exp();
            denom += *p;
        }
        prow.iter_mut().for_each(|p| *p /= denom);
        total -= (row[labels[b]].as_f64() - max) - denom.ln();
    }
    let labels = labels.to_vec();
    Ok(Tensor::from_op(
        "softmax_cross_entropy",
        vec![1],
        vec![T::of_f64(total / batch as f64)],
        vec![logits.clone()],
        move |g| {
            let scale = g[0].as_f64() / batch as f64;
            let mut gl = vec![T::zero(); probs.len()];
            for (b, (grow, prow)) in gl.chunks_exact_mut(k).zip(probs.chunks_exact(k)).enumerate() {
                for (j, (gv, &p)) in grow.iter_mut().zip(prow).enumerate() {
                    let y = if j == labels[b] { 1.0 } else { 0.0 };
                    *gv = T::of_f64((p - y) * scale);
                }
            }
            vec![Some(gl)]
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let l = Tensor::<f64>::zeros(&[3, 5]);
        let ce = softmax_cross_entropy(&l, &[0, 2, 4]).unwrap().item();
        assert!((ce - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_approach_zero() {
        let l = Tensor::<f64>::new(&[1, 3], vec![40.0, 0.0, 0.0]);
        assert!(softmax_cross_entropy(&l, &[0]).unwrap().item() < 1e-15);
    }

    #[test]
    fn out_of_range_label() {
        let l = Tensor::<f32>::zeros(&[1, 2]);
        assert!(softmax_cross_entropy(&l, &[2]).is_err());
    }
}
