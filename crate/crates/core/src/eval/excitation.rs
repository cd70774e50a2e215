use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::autograd::Tensor;
use crate::beats::{Beat, BEAT_LEN};
use crate::model::{Attention, ForwardCtx, Network};
use crate::wfdb::AamiClass;

/// An ISE position: 1-based block and unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub block: usize,
    pub unit: usize,
}

/// The first unit of every block.
pub fn default_sites(model: &Network) -> Vec<Site> {
    if model.spec.attention == Attention::None {
        return Vec::new();
    }
    (1..=model.n_blocks()).map(|block| Site { block, unit: 1 }).collect()
}

/// Mean gate vector of one class at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationTrace {
    pub block: usize,
    pub unit: usize,
    pub class: AamiClass,
    pub n_samples: usize,
    pub with_replacement: bool,
    pub mean: Vec<f64>,
}

/// How the beats of one class were drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingNote {
    pub class: AamiClass,
    pub available: usize,
    pub drawn: usize,
    pub with_replacement: bool,
}

const CAPTURE_BATCH: usize = 64;

/// Averages the gates at `sites` over `per_class` beats drawn at random
/// from each class except Q. Classes with fewer beats are drawn with
/// replacement; classes with none are skipped and noted with `drawn = 0`.
pub fn capture_excitations<R: Rng + ?Sized>(
    model: &Network,
    beats: &[&Beat],
    sites: &[Site],
    per_class: usize,
    rng: &mut R,
) -> Result<(Vec<ExcitationTrace>, Vec<SamplingNote>)> {
    if model.spec.attention == Attention::None {
        return Err(EvalError::Config("model has no ISE blocks".into()));
    }
    if per_class == 0 {
        return Err(EvalError::Config("per-class sample count must be positive".into()));
    }
    for s in sites {
        if !model.units().any(|u| u.block == s.block && u.unit == s.unit) {
            return Err(EvalError::Config(format!("no unit {} in block {}", s.unit, s.block)));
        }
    }
    let n_leads = model.spec.lead_mode.n_leads();
    let mut traces = Vec::new();
    let mut notes = Vec::new();
    for class in [AamiClass::N, AamiClass::S, AamiClass::V, AamiClass::F] {
        let pool: Vec<&Beat> = beats.iter().copied().filter(|b| b.aami_class == class).collect();
        let with_replacement = pool.len() < per_class;
        let chosen: Vec<&Beat> = if pool.is_empty() {
            Vec::new()
        } else if with_replacement {
            (0..per_class).map(|_| pool[rng.random_range(0..pool.len())]).collect()
        } else {
            let mut idx = rand::seq::index::sample(rng, pool.len(), per_class).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pool[i]).collect()
        };
        notes.push(SamplingNote {
            class,
            available: pool.len(),
            drawn: chosen.len(),
            with_replacement: with_replacement && !pool.is_empty(),
        });
        if chosen.is_empty() {
            continue;
        }
        if with_replacement {
            log::warn!("class {}: {} beats available, drawing {per_class} with replacement", class.symbol(), pool.len());
        }

        let mut sums: Vec<Option<Vec<f64>>> = vec![None; sites.len()];
        for chunk in chosen.chunks(CAPTURE_BATCH) {
            let mut x = Vec::with_capacity(chunk.len() * BEAT_LEN * n_leads);
            for b in chunk {
                if b.leads.len() != BEAT_LEN * n_leads {
                    return Err(EvalError::Shape(format!("beat {}:{} does not match the model input", b.record_id, b.r_index)));
                }
                x.extend(b.leads.iter().map(|&v| f64::from(v)));
            }
            let input = Tensor::<f64>::new(&[chunk.len(), 1, BEAT_LEN, n_leads], x);
            let mut ctx = ForwardCtx::<f64>::infer().capture_gates();
            model.forward(&input, &mut ctx)?;
            for cap in ctx.take_captures() {
                let Some(si) = sites.iter().position(|s| s.block == cap.block && s.unit == cap.unit) else {
                    continue;
                };
                let acc = sums[si].get_or_insert_with(|| vec![0.0; cap.channels]);
                for row in cap.gates.chunks(cap.channels) {
                    for (a, g) in acc.iter_mut().zip(row) {
                        *a += g;
                    }
                }
            }
        }
        for (site, sum) in sites.iter().zip(sums) {
            let sum = sum.expect("every site produces gates");
            traces.push(ExcitationTrace {
                block: site.block,
                unit: site.unit,
                class,
                n_samples: chosen.len(),
                with_replacement,
                mean: sum.into_iter().map(|s| s / chosen.len() as f64).collect(),
            });
        }
    }
    Ok((traces, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::{LeadMode, Origin, Split};
    use crate::model::ModelSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn beat(class: AamiClass, phase: f32) -> Beat {
        Beat {
            record_id: "t".into(),
            r_index: 0,
            n_leads: 1,
            leads: (0..BEAT_LEN).map(|t| (t as f32 * 0.05 + phase).sin()).collect(),
            aami_class: class,
            split: Split::Test,
            origin: Origin::Natural,
        }
    }

    fn model() -> Network {
        Network::build(&ModelSpec {
            depth: 11,
            lead_mode: LeadMode::Mlii,
            ..ModelSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_calibrators_give_one_half() {
        let mut net = model();
        net.zero_ise_calibrators();
        let beats: Vec<Beat> = (0..6).map(|i| beat(AamiClass::ALL[i % 4], i as f32)).collect();
        let refs: Vec<&Beat> = beats.iter().collect();
        let sites = default_sites(&net);
        let (traces, notes) = capture_excitations(&net, &refs, &sites, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(traces.len(), 4 * sites.len());
        assert!(traces.iter().flat_map(|t| &t.mean).all(|&v| v == 0.5));
        assert!(notes.iter().all(|n| n.with_replacement));
    }

    #[test]
    fn duplicated_beat_matches_single() {
        let net = model();
        let b = beat(AamiClass::V, 0.3);
        let many: Vec<&Beat> = std::iter::repeat_n(&b, 5).collect();
        let sites = default_sites(&net);
        let (a, _) = capture_excitations(&net, &many, &sites, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (one, _) = capture_excitations(&net, &many[..1], &sites, 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for (x, y) in a.iter().zip(&one) {
            for (p, q) in x.mean.iter().zip(&y.mean) {
                assert!((p - q).abs() < 1e-12);
                assert!(*p > 0.0 && *p < 1.0);
            }
        }
    }
}
