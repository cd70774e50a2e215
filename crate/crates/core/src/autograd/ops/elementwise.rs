use std::hash::{Hash, Hasher};

use crate::autograd::{kinks_enabled, record_kink, shape_err, Result, Scalar, Tensor};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mask: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
    if kinks_enabled() {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        mask.hash(&mut h);
        let tie = x.data().iter().any(|&v| v == T::zero());
        record_kink(h.finish(), tie);
    }
    let out = x.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor::from_op("relu", x.shape().to_vec(), out, vec![x.clone()], move |g| {
        vec![Some(g.iter().zip(&mask).map(|(&gv, &m)| if m { gv } else { T::zero() }).collect())]
    })
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let out: Vec<T> = x.data().iter().map(|&v| T::one() / (T::one() + (-v).exp())).collect();
    let s = out.clone();
    Tensor::from_op("sigmoid", x.shape().to_vec(), out, vec![x.clone()], move |g| {
        vec![Some(g.iter().zip(&s).map(|(&gv, &sv)| gv * sv * (T::one() - sv)).collect())]
    })
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return shape_err("add", format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    let out = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Ok(Tensor::from_op("add", a.shape().to_vec(), out, vec![a.clone(), b.clone()], |g| {
        vec![Some(g.to_vec()), Some(g.to_vec())]
    }))
}

pub fn mul_scalar<T: Scalar>(x: &Tensor<T>, s: T) -> Tensor<T> {
    let out = x.data().iter().map(|&v| v * s).collect();
    Tensor::from_op("mul_scalar", x.shape().to_vec(), out, vec![x.clone()], move |g| {
        vec![Some(g.iter().map(|&gv| gv * s).collect())]
    })
}

/// Scalar `Σ wᵢ xᵢ` for a fixed weight vector. Used to project tensor
/// outputs to a scalar for gradient checks.
pub fn weighted_sum<T: Scalar>(x: &Tensor<T>, w: &[T]) -> Result<Tensor<T>> {
    if w.len() != x.len() {
        return shape_err("weighted_sum", format!("{} weights for {} values", w.len(), x.len()));
    }
    let s = x.data().iter().zip(w).map(|(&a, &b)| a.as_f64() * b.as_f64()).sum::<f64>();
    let w = w.to_vec();
    Ok(Tensor::from_op("weighted_sum", vec![1], vec![T::of_f64(s)], vec![x.clone()], move |g| {
        vec![Some(w.iter().map(|&wv| wv * g[0]).collect())]
    }))
}

pub fn sum<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.data().iter().map(|v| v.as_f64()).sum::<f64>();
    let n = x.len();
    Tensor::from_op("sum", vec![1], vec![T::of_f64(s)], vec![x.clone()], move |g| vec![Some(vec![g[0]; n])])
}

/// Same values, new shape with equal element count.
pub fn reshape<T: Scalar>(x: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if shape.iter().product::<usize>() != x.len() {
        return shape_err("reshape", format!("{:?} -> {shape:?}", x.shape()));
    }
    Ok(Tensor::from_op("reshape", shape.to_vec(), x.to_vec(), vec![x.clone()], |g| vec![Some(g.to_vec())]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activations_at_reference_points() {
        let r = relu(&Tensor::<f32>::new(&[2], vec![-1.0, 2.0]));
        assert_eq!(r.data(), &[0.0, 2.0]);
        assert_eq!(sigmoid(&Tensor::<f32>::scalar(0.0)).item(), 0.5);
    }

    #[test]
    fn add_requires_equal_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[3, 2]);
        assert!(add(&a, &b).is_err());
    }
}
