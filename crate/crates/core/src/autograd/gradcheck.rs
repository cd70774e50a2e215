use super::{with_kink_log, AutogradError, Result, Scalar, Tensor};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over elements of `|a - n| / max(|a|, |n|, 1e-6)`.
    pub max_rel_error: f64,
    /// Elements compared.
    pub checked: usize,
    /// Elements whose ±step evaluations crossed a kink (ReLU sign flip or
    /// max-pool argmax switch) and were left out.
    pub skipped: usize,
    /// The base point sits exactly on a non-differentiable point (max tie or
    /// ReLU input equal to zero). Only a subgradient exists there.
    pub on_kink: bool,
}

impl GradCheckReport {
    pub fn checkable(&self) -> bool {
        !self.on_kink && self.checked > 0
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.checkable() && self.max_rel_error < tolerance
    }
}

/// Checks the gradient of a scalar function `f` at `x` against central
/// differences with the given step.
pub fn grad_check<T, F>(f: F, x: &Tensor<T>, step: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Tensor<T>,
{
    let leaf = Tensor::leaf(x.shape(), x.to_vec());
    let (out, base) = with_kink_log(|| f(&leaf));
    if out.len() != 1 {
        return Err(AutogradError::NonScalar(out.len()));
    }
    out.backward();
    let analytic = leaf.grad().unwrap_or_else(|| vec![T::zero(); x.len()]);

    let h = T::of_f64(step);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        on_kink: base.ties,
    };
    let mut values = x.to_vec();
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + h;
        let (fp, kp) = with_kink_log(|| f(&Tensor::new(x.shape(), values.clone())).item());
        values[i] = orig - h;
        let (fm, km) = with_kink_log(|| f(&Tensor::new(x.shape(), values.clone())).item());
        values[i] = orig;
        if kp.signature != base.signature || km.signature != base.signature {
            report.skipped += 1;
            continue;
        }
        // Use the realized step so rounding of x ± h does not bias the quotient.
        let span = (orig + h).as_f64() - (orig - h).as_f64();
        let numeric = (fp.as_f64() - fm.as_f64()) / span;
        let a = analytic[i].as_f64();
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        report.max_rel_error = report.max_rel_error.max((a - numeric).abs() / denom);
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::ops;

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::<f64>::new(&[2], vec![1.0, 2.0]);
        let f = |t: &Tensor<f64>| {
            let sq = Tensor::from_op(
                "square",
                t.shape().to_vec(),
                t.data().iter().map(|v| v * v).collect(),
                vec![t.clone()],
                {
                    let t = t.clone();
                    move |g| vec![Some(g.iter().zip(t.data()).map(|(g, v)| 2.0 * v * g).collect())]
                },
            );
            ops::sum(&sq)
        };
        let leaf = Tensor::leaf(&[2], vec![1.0, 2.0]);
        f(&leaf).backward();
        assert_eq!(leaf.grad().unwrap(), vec![2.0, 4.0]);
        let r = grad_check(f, &x, 1e-3).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert!(r.passes(1e-6));
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let x = Tensor::<f64>::new(&[3], vec![1.0, 2.0, 3.0]);
        assert_eq!(grad_check(|t| ops::relu(t), &x, 1e-3), Err(AutogradError::NonScalar(3)));
    }

    #[test]
    fn maxpool_tie_is_flagged() {
        let x = Tensor::<f64>::new(&[1, 1, 4, 1], vec![2.0, 2.0, 1.0, 0.5]);
        let r = grad_check(|t| ops::sum(&ops::maxpool1d(t, 3, 2).unwrap()), &x, 1e-3).unwrap();
        assert!(r.on_kink);
        assert!(!r.checkable());
    }
}
