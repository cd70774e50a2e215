use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::wfdb::AamiClass;

/// Treatment of true-F beats when scoring a positive class other than F.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionPolicy {
    /// F beats are ordinary negatives.
    #[default]
    Negative,
    /// F beats predicted positive are dropped instead of counted as false
    /// positives.
    NotFalsePositive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// An exact ratio, `None` when its denominator is zero.
pub type Fraction = Option<Ratio<u64>>;

fn frac(num: u64, den: u64) -> Fraction {
    (den != 0).then(|| Ratio::new(num, den))
}

pub fn fraction_to_f64(f: Fraction) -> Option<f64> {
    f.map(|r| *r.numer() as f64 / *r.denom() as f64)
}

/// Percentage with one decimal, or `-` when undefined.
pub fn display_percent(f: Option<f64>) -> String {
    match f {
        Some(v) => format!("{:.1}", 100.0 * v),
        None => "-".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub positive_class: AamiClass,
    pub subset_id: String,
    pub fusion_policy: FusionPolicy,
    pub counts: BinaryCounts,
    pub acc: Fraction,
    pub sen: Fraction,
    pub spe: Fraction,
    pub ppr: Fraction,
    pub mcc: Option<f64>,
}

impl MetricsReport {
    pub fn from_counts(positive_class: AamiClass, subset_id: &str, fusion_policy: FusionPolicy, c: BinaryCounts) -> Self {
        MetricsReport {
            positive_class,
            subset_id: subset_id.to_string(),
            fusion_policy,
            counts: c,
            acc: frac(c.tp + c.tn, c.total()),
            sen: frac(c.tp, c.tp + c.fn_),
            spe: frac(c.tn, c.tn + c.fp),
            ppr: frac(c.tp, c.tp + c.fp),
            mcc: mcc(&c),
        }
    }

    pub fn acc_f64(&self) -> Option<f64> {
        fraction_to_f64(self.acc)
    }

    pub fn sen_f64(&self) -> Option<f64> {
        fraction_to_f64(self.sen)
    }

    pub fn spe_f64(&self) -> Option<f64> {
        fraction_to_f64(self.spe)
    }

    pub fn ppr_f64(&self) -> Option<f64> {
        fraction_to_f64(self.ppr)
    }
}

/// `(TP TN - FP FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))`; undefined when
/// any factor is zero.
pub fn mcc(c: &BinaryCounts) -> Option<f64> {
    let (tp, tn, fp, fn_) = (c.tp as u128, c.tn as u128, c.fp as u128, c.fn_ as u128);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return None;
    }
    let (a, b) = (tp * tn, fp * fn_);
    let num = if a >= b { (a - b) as f64 } else { -((b - a) as f64) };
    let den = factors.iter().map(|&f| (f as f64).sqrt()).product::<f64>();
    Some((num / den).clamp(-1.0, 1.0))
}

/// Positive-versus-rest counts. True-Q beats are left out entirely.
pub fn binary_counts(cm: &ConfusionMatrix, positive: AamiClass, policy: FusionPolicy) -> BinaryCounts {
    let pos = positive.index().expect("positive class is scored");
    let q = AamiClass::Q.index().unwrap();
    let f = AamiClass::F.index().unwrap();
    let mut c = BinaryCounts::default();
    for t in 0..cm.n_classes {
        if t == q && pos != q {
            continue;
        }
        for p in 0..cm.n_classes {
            let n = cm.get(t, p);
            match (t == pos, p == pos) {
                (true, true) => c.tp += n,
                (true, false) => c.fn_ += n,
                (false, true) => {
                    if !(t == f && policy == FusionPolicy::NotFalsePositive) {
                        c.fp += n
                    }
                }
                (false, false) => c.tn += n,
            }
        }
    }
    c
}

/// Accuracy, sensitivity, specificity, positive predictive value and MCC
/// for `positive` against every other class.
pub fn binary_metrics(cm: &ConfusionMatrix, positive: AamiClass, policy: FusionPolicy) -> MetricsReport {
    MetricsReport::from_counts(positive, &cm.subset_id, policy, binary_counts(cm, positive, policy))
}
