use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Beat, BeatsError, Origin, Result};
use crate::wfdb::AamiClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    /// Final per-class counts in `AamiClass::ALL` order.
    pub targets: [usize; 5],
    pub smote_k: usize,
    /// Classes raised to their target by SMOTE before the Tomek pass.
    pub smote_classes: Vec<AamiClass>,
    pub seed: u64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        BalanceConfig {
            targets: [10000, 8000, 8000, 4000, 0],
            smote_k: 5,
            smote_classes: vec![AamiClass::S],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub natural: [usize; 5],
    pub smote_synthetic: [usize; 5],
    pub tomek_removed: [usize; 5],
    pub duplicated: [usize; 5],
    pub subsampled_out: [usize; 5],
    pub output: [usize; 5],
}

fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let tail: f32 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
    acc.iter().sum::<f32>() + tail
}

/// The `k` nearest other points of every point by Euclidean distance,
/// closest first. Equal distances resolve to the lower index.
pub fn nearest_neighbors(points: &[&[f32]], k: usize) -> Vec<Vec<usize>> {
    let k = k.min(points.len().saturating_sub(1));
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
            for (j, q) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = sq_dist(p, q);
                if best.len() == k && d >= best[k - 1].0 {
                    continue;
                }
                // scanning j in increasing order, so a tie never displaces
                let pos = best.partition_point(|&(bd, _)| bd <= d);
                best.insert(pos, (d, j));
                best.truncate(k);
            }
            best.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Pairs `(i, j)`, `i < j`, that are each other's nearest neighbour and
/// carry different labels.
pub fn tomek_links(points: &[&[f32]], labels: &[usize]) -> Vec<(usize, usize)> {
    let nn: Vec<Option<usize>> = nearest_neighbors(points, 1).into_iter().map(|v| v.first().copied()).collect();
    nn.iter()
        .enumerate()
        .filter_map(|(i, &j)| {
            let j = j?;
            (i < j && nn[j] == Some(i) && labels[i] != labels[j]).then_some((i, j))
        })
        .collect()
}

/// Removes the N member of every Tomek link. Links between two non-N
/// classes are left alone. Returns the kept beats in input order.
pub fn tomek_edit(beats: Vec<Beat>) -> (Vec<Beat>, [usize; 5]) {
    let points: Vec<&[f32]> = beats.iter().map(|b| b.leads.as_slice()).collect();
    let labels: Vec<usize> = beats.iter().map(Beat::label).collect();
    let n_idx = AamiClass::N.index().unwrap();
    let mut drop = vec![false; beats.len()];
    for (i, j) in tomek_links(&points, &labels) {
        if labels[i] == n_idx {
            drop[i] = true;
        } else if labels[j] == n_idx {
            drop[j] = true;
        }
    }
    let mut removed = [0; 5];
    let kept = beats
        .into_iter()
        .zip(drop)
        .filter_map(|(b, d)| {
            if d {
                removed[b.label()] += 1;
                None
            } else {
                Some(b)
            }
        })
        .collect();
    (kept, removed)
}

/// Adds synthetic beats `a + u (b - a)`, `u ~ U(0, 1)`, where `a` is drawn
/// uniformly from the class and `b` from `a`'s `k` nearest neighbours,
/// until `target_n` beats exist. Returns the input unchanged when it already
/// has `target_n` or more.
pub fn smote_oversample<R: Rng + ?Sized>(class_beats: &[Beat], target_n: usize, k: usize, rng: &mut R) -> Result<Vec<Beat>> {
    let n = class_beats.len();
    let mut out = class_beats.to_vec();
    if target_n <= n {
        return Ok(out);
    }
    if n < 2 || k == 0 {
        return Err(BeatsError::Config(format!("SMOTE needs at least 2 beats and k >= 1 (got {n} beats, k = {k})")));
    }
    let points: Vec<&[f32]> = class_beats.iter().map(|b| b.leads.as_slice()).collect();
    let nn = nearest_neighbors(&points, k);
    out.reserve(target_n - n);
    for _ in n..target_n {
        let i = rng.random_range(0..n);
        let j = nn[i][rng.random_range(0..nn[i].len())];
        let u: f32 = rng.random();
        let (a, b) = (&class_beats[i], &class_beats[j]);
        let mut synth = a.clone();
        for (s, bv) in synth.leads.iter_mut().zip(&b.leads) {
            *s += u * (bv - *s);
        }
        synth.origin = Origin::SmoteSynthetic;
        out.push(synth);
    }
    Ok(out)
}

/// Brings one class to exactly `target` beats: a uniform subsample without
/// replacement when there are more, whole copies plus a uniform partial copy
/// when there are fewer. Input order is preserved within each pass.
fn resize_class<R: Rng + ?Sized>(beats: Vec<Beat>, target: usize, rng: &mut R) -> (Vec<Beat>, usize, usize) {
    let n = beats.len();
    if n >= target {
        let mut keep: Vec<usize> = sample(rng, n, target).into_vec();
        keep.sort_unstable();
        let mut slots: Vec<Option<Beat>> = beats.into_iter().map(Some).collect();
        let out = keep.into_iter().map(|i| slots[i].take().unwrap()).collect();
        return (out, 0, n - target);
    }
    let mut out = Vec::with_capacity(target);
    let dup = |b: &Beat| {
        let mut d = b.clone();
        d.origin = Origin::Duplicated;
        d
    };
    for _ in 1..target / n {
        out.extend(beats.iter().map(dup));
    }
    let mut extra: Vec<usize> = sample(rng, n, target % n).into_vec();
    extra.sort_unstable();
    out.extend(extra.into_iter().map(|i| dup(&beats[i])));
    let added = out.len();
    let mut all = beats;
    all.extend(out);
    (all, added, 0)
}

/// SMOTE the configured classes up to target, edit Tomek links, then
/// duplicate or subsample every class to its exact target. Output is
/// grouped by class in `AamiClass::ALL` order.
pub fn label_shuffle_balance<R: Rng + ?Sized>(train: &[Beat], cfg: &BalanceConfig, rng: &mut R) -> Result<(Vec<Beat>, BalanceReport)> {
    let mut report = BalanceReport::default();
    let mut by_class: Vec<Vec<Beat>> = vec![Vec::new(); 5];
    for b in train {
        by_class[b.label()].push(b.clone());
    }
    for (i, c) in by_class.iter().enumerate() {
        report.natural[i] = c.len();
    }
    for class in &cfg.smote_classes {
        let Some(i) = class.index() else { continue };
        if by_class[i].len() < cfg.targets[i] {
            let grown = smote_oversample(&by_class[i], cfg.targets[i], cfg.smote_k, rng)?;
            report.smote_synthetic[i] = grown.len() - by_class[i].len();
            by_class[i] = grown;
        }
    }
    let (kept, removed) = tomek_edit(by_class.concat());
    report.tomek_removed = removed;
    let mut by_class: Vec<Vec<Beat>> = vec![Vec::new(); 5];
    for b in kept {
        by_class[b.label()].push(b);
    }

    let mut out = Vec::with_capacity(cfg.targets.iter().sum());
    for (i, beats) in by_class.into_iter().enumerate() {
        let target = cfg.targets[i];
        if beats.is_empty() && target > 0 {
            return Err(BeatsError::Config(format!(
                "class {} has no training beats but a target of {target}",
                AamiClass::ALL[i]
            )));
        }
        let (resized, dup, dropped) = resize_class(beats, target, rng);
        report.duplicated[i] = dup;
        report.subsampled_out[i] = dropped;
        report.output[i] = resized.len();
        out.extend(resized);
    }
    Ok((out, report))
}
