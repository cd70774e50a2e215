use crate::autograd::ops::softmax_cross_entropy;
use crate::autograd::{Scalar, Tensor};
use crate::model::ParamStore;

use super::Result;

/// `sum w^2` over trainable, decayable parameters.
pub fn l2_penalty(params: &ParamStore) -> f64 {
    params
        .iter()
        .filter(|p| p.trainable && p.decayable)
        .flat_map(|p| p.values.iter())
        .map(|&w| f64::from(w) * f64::from(w))
        .sum()
}

/// Adds `2 lambda w` to the gradient of every decayable parameter.
pub fn add_l2_gradient<T: Scalar>(params: &ParamStore, grads: &mut [(usize, Vec<T>)], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (id, g) in grads.iter_mut() {
        let p = params.get(*id);
        if p.decayable {
            for (gi, &w) in g.iter_mut().zip(&p.values) {
                *gi = *gi + T::of_f64(2.0 * lambda * f64::from(w));
            }
        }
    }
}

/// Mean cross-entropy tensor (to differentiate) and the full objective
/// `CE + lambda * sum w^2` as a number.
pub fn loss<T: Scalar>(logits: &Tensor<T>, labels: &[usize], params: &ParamStore, lambda: f64) -> Result<(Tensor<T>, f64)> {
    let ce = softmax_cross_entropy(logits, labels)?;
    let total = ce.item().as_f64() + lambda * l2_penalty(params);
    Ok((ce, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parameter;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        for (name, values, decayable) in [("w", vec![1.0, -2.0], true), ("g", vec![3.0], false)] {
            s.add(Parameter {
                name: name.into(),
                shape: vec![values.len()],
                values,
                trainable: true,
                decayable,
                lr_scale: 1.0,
            })
            .unwrap();
        }
        s
    }

    #[test]
    fn penalty_skips_non_decayable() {
        assert_eq!(l2_penalty(&store()), 5.0);
    }

    #[test]
    fn gradient_matches_derivative() {
        let s = store();
        let mut g = vec![(0usize, vec![0.5f64, 0.0]), (1, vec![1.0])];
        add_l2_gradient(&s, &mut g, 0.1);
        assert_eq!(g[0].1, vec![0.7, -0.4]);
        assert_eq!(g[1].1, vec![1.0]);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::<f64>::zeros(&[4, 5]);
        let (ce, total) = loss(&logits, &[0, 1, 2, 3], &store(), 0.0).unwrap();
        assert!((ce.item() - 5f64.ln()).abs() < 1e-12);
        assert_eq!(total, ce.item());
    }
}
