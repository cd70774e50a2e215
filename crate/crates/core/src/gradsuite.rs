//! Finite-difference verification of every differentiable op and the ISE
//! block on randomly drawn shapes, in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autograd::ops::{
    add, batchnorm_infer, batchnorm_train, conv1d, dense, entropy_reduce, global_avg_pool, maxpool1d, mul_scalar, relu, reshape,
    scale_channels, sigmoid, softmax_cross_entropy, softmax_spatial, sum, weighted_sum,
};
use crate::autograd::{grad_check, GradCheckReport, Tensor};
use crate::model::ise_block;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-3;

/// Aggregate over all cases of one op. Every input argument of a case is
/// checked separately.
#[derive(Debug, Clone, Serialize)]
pub struct OpCheck {
    pub op: &'static str,
    pub cases: usize,
    /// Cases whose base point was non-differentiable and so unchecked.
    pub on_kink: usize,
    pub elements: usize,
    pub skipped_elements: usize,
    pub max_rel_error: f64,
}

impl OpCheck {
    pub fn checked_cases(&self) -> usize {
        self.cases - self.on_kink
    }

    pub fn passes(&self, min_cases: usize, tolerance: f64) -> bool {
        self.checked_cases() >= min_cases && self.max_rel_error < tolerance
    }
}

type Inputs = Vec<Tensor<f64>>;
type OpFn = Box<dyn Fn(&[Tensor<f64>]) -> Tensor<f64>>;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect())
}

/// Values bounded away from zero so ReLU stays differentiable under ±step.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape,
        (0..n)
            .map(|_| {
                let m = rng.random_range(0.05..1.0);
                if rng.random_bool(0.5) { m } else { -m }
            })
            .collect(),
    )
}

fn positive(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(0.5..1.5)).collect())
}

fn feature_shape(rng: &mut ChaCha8Rng, max_w: usize, max_c: usize) -> [usize; 4] {
    [rng.random_range(1..=3), 1, rng.random_range(2..=max_w), rng.random_range(1..=max_c)]
}

fn case(rng: &mut ChaCha8Rng, op: &str) -> (Inputs, OpFn) {
    match op {
        "conv1d" => {
            let [b, _, w, cin] = feature_shape(rng, 12, 4);
            let (k, cout, stride) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=2));
            (
                vec![randn(rng, &[b, 1, w, cin], 1.0), randn(rng, &[1, k, cin, cout], 1.0)],
                Box::new(move |a| conv1d(&a[0], &a[1], stride).unwrap()),
            )
        }
        "maxpool1d" => {
            let s = feature_shape(rng, 14, 3);
            let (k, stride) = (rng.random_range(2..=3), rng.random_range(1..=2));
            (vec![randn(rng, &s, 1.0)], Box::new(move |a| maxpool1d(&a[0], k, stride).unwrap()))
        }
        "batchnorm_train" => {
            let mut s = feature_shape(rng, 8, 4);
            s[0] = s[0].max(2);
            let c = s[3];
            (
                vec![randn(rng, &s, 1.0), positive(rng, &[c]), randn(rng, &[c], 1.0)],
                Box::new(|a| batchnorm_train(&a[0], &a[1], &a[2], 1e-5).unwrap().output),
            )
        }
        "batchnorm_infer" => {
            let s = feature_shape(rng, 8, 4);
            let c = s[3];
            let mean: Vec<f64> = (0..c).map(|_| rng.random_range(-0.5..0.5)).collect();
            let var: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..2.0)).collect();
            (
                vec![randn(rng, &s, 1.0), positive(rng, &[c]), randn(rng, &[c], 1.0)],
                Box::new(move |a| batchnorm_infer(&a[0], &a[1], &a[2], &mean, &var, 1e-5).unwrap()),
            )
        }
        "dense" => {
            let (b, n, m) = (rng.random_range(1..=4), rng.random_range(1..=6), rng.random_range(1..=5));
            (
                vec![randn(rng, &[b, n], 1.0), randn(rng, &[n, m], 1.0), randn(rng, &[m], 1.0)],
                Box::new(|a| dense(&a[0], &a[1], &a[2]).unwrap()),
            )
        }
        "relu" => {
            let s = feature_shape(rng, 8, 3);
            (vec![away_from_zero(rng, &s)], Box::new(|a| relu(&a[0])))
        }
        "sigmoid" => {
            let s = feature_shape(rng, 8, 3);
            (vec![randn(rng, &s, 3.0)], Box::new(|a| sigmoid(&a[0])))
        }
        "add" => {
            let s = feature_shape(rng, 8, 3);
            (vec![randn(rng, &s, 1.0), randn(rng, &s, 1.0)], Box::new(|a| add(&a[0], &a[1]).unwrap()))
        }
        "mul_scalar" => {
            let s = feature_shape(rng, 8, 3);
            let k = rng.random_range(-2.0..2.0);
            (vec![randn(rng, &s, 1.0)], Box::new(move |a| mul_scalar(&a[0], k)))
        }
        "reshape" => {
            let [b, _, w, c] = feature_shape(rng, 8, 3);
            (vec![randn(rng, &[b, 1, w, c], 1.0)], Box::new(move |a| reshape(&a[0], &[b, w * c]).unwrap()))
        }
        "sum" => {
            let s = feature_shape(rng, 8, 3);
            (vec![randn(rng, &s, 1.0)], Box::new(|a| sum(&a[0])))
        }
        "softmax_spatial" => {
            let s = feature_shape(rng, 10, 4);
            (vec![randn(rng, &s, 2.0)], Box::new(|a| softmax_spatial(&a[0]).unwrap()))
        }
        "entropy_reduce" => {
            let s = feature_shape(rng, 10, 4);
            let m = softmax_spatial(&randn(rng, &s, 1.0)).unwrap().detach();
            (vec![m], Box::new(|a| entropy_reduce(&a[0]).unwrap()))
        }
        "scale_channels" => {
            let [b, _, w, c] = feature_shape(rng, 8, 4);
            (
                vec![randn(rng, &[b, 1, w, c], 1.0), randn(rng, &[b, c], 1.0)],
                Box::new(|a| scale_channels(&a[0], &a[1]).unwrap()),
            )
        }
        "global_avg_pool" => {
            let s = feature_shape(rng, 10, 4);
            (vec![randn(rng, &s, 1.0)], Box::new(|a| global_avg_pool(&a[0]).unwrap()))
        }
        "softmax_cross_entropy" => {
            let (b, k) = (rng.random_range(1..=5), rng.random_range(2..=5));
            let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
            (vec![randn(rng, &[b, k], 2.0)], Box::new(move |a| softmax_cross_entropy(&a[0], &labels).unwrap()))
        }
        "ise_block" => {
            let [b, _, w, c] = feature_shape(rng, 10, 6);
            let hidden = rng.random_range(1..=4);
            (
                vec![
                    randn(rng, &[b, 1, w, c], 1.5),
                    randn(rng, &[c, hidden], 1.0),
                    randn(rng, &[hidden], 0.5),
                    randn(rng, &[hidden, c], 1.0),
                    randn(rng, &[c], 0.5),
                ],
                Box::new(|a| ise_block(&a[0], &a[1], &a[2], &a[3], &a[4], None).unwrap().output),
            )
        }
        other => panic!("unknown op {other}"),
    }
}

pub const OPS: [&str; 17] = [
    "conv1d",
    "maxpool1d",
    "batchnorm_train",
    "batchnorm_infer",
    "dense",
    "relu",
    "sigmoid",
    "add",
    "mul_scalar",
    "reshape",
    "sum",
    "softmax_spatial",
    "entropy_reduce",
    "scale_channels",
    "global_avg_pool",
    "softmax_cross_entropy",
    "ise_block",
];

fn merge(acc: &mut OpCheck, r: &GradCheckReport) {
    acc.elements += r.checked;
    acc.skipped_elements += r.skipped;
    acc.max_rel_error = acc.max_rel_error.max(r.max_rel_error);
}

/// Runs `cases` random cases per op. Non-scalar outputs are reduced by a
/// fixed random projection.
pub fn run(cases: usize, seed: u64) -> Vec<OpCheck> {
    OPS.iter()
        .enumerate()
        .map(|(oi, &op)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(oi as u64);
            let mut acc = OpCheck {
                op,
                cases,
                on_kink: 0,
                elements: 0,
                skipped_elements: 0,
                max_rel_error: 0.0,
            };
            for _ in 0..cases {
                let (inputs, f) = case(&mut rng, op);
                let out_len = f(&inputs).len();
                let proj: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut kink = false;
                for k in 0..inputs.len() {
                    let scalar = |x: &Tensor<f64>| {
                        let mut args = inputs.clone();
                        args[k] = x.clone();
                        weighted_sum(&f(&args), &proj).unwrap()
                    };
                    let r = grad_check(scalar, &inputs[k], STEP).expect("scalar objective");
                    if r.on_kink {
                        kink = true;
                    } else {
                        merge(&mut acc, &r);
                    }
                }
                acc.on_kink += usize::from(kink);
            }
            acc
        })
        .collect()
}
