use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::network::{BnDef, Builder, HeadDef, Network, UnitDef};
use super::params::ParamStore;
use super::{ModelError, Result};

/// How the appended classifier starts out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    /// He-normal conv and dense weights, fresh batch norm.
    Random,
    /// Only valid when cutting after the last block: the conv is an
    /// identity, the batch norm is the base model's final one and the dense
    /// rows are the base classifier's rows for the listed classes, so the
    /// new model reproduces the base logits of those classes.
    Identity { classes: Vec<usize> },
}

fn remap_bn(b: &mut BnDef, m: &HashMap<usize, usize>) {
    for id in [&mut b.gamma, &mut b.beta, &mut b.mean, &mut b.var] {
        *id = m[id];
    }
}

fn remap_unit(u: &mut UnitDef, m: &HashMap<usize, usize>) {
    remap_bn(&mut u.bn1, m);
    remap_bn(&mut u.bn2, m);
    remap_bn(&mut u.bn3, m);
    for id in [&mut u.conv_a, &mut u.conv_b, &mut u.conv_c] {
        *id = m[id];
    }
    if let Some(p) = u.proj.as_mut() {
        *p = m[p];
    }
    if let Some(i) = u.ise.as_mut() {
        for id in [&mut i.w1, &mut i.b1, &mut i.w2, &mut i.b2] {
            *id = m[id];
        }
    }
}

/// Keeps the stem and blocks `1..=cut_block` of `base` (copied, with
/// `segment_lr_scale` on their learning rate) and appends a fresh
/// `1x3 conv -> BN -> ReLU -> GAP -> dense(n_classes)` head.
pub fn truncate_and_head(
    base: &Network,
    cut_block: usize,
    n_classes: usize,
    init: &HeadInit,
    segment_lr_scale: f32,
    seed: u64,
) -> Result<Network> {
    if base.is_truncated() {
        return Err(ModelError::Spec("network is already truncated".into()));
    }
    if cut_block == 0 || cut_block > base.n_blocks() {
        return Err(ModelError::Spec(format!("cut block {cut_block} outside 1..={}", base.n_blocks())));
    }
    if n_classes < 2 {
        return Err(ModelError::Spec("a head needs at least 2 classes".into()));
    }
    let keep = |name: &str| {
        name.starts_with("conv1.")
            || (1..=cut_block).any(|b| name.starts_with(&format!("block{b}.")))
    };
    let mut params = ParamStore::new();
    let mut remap = HashMap::new();
    for (old, p) in base.params.iter().enumerate() {
        if keep(&p.name) {
            let mut p = p.clone();
            p.lr_scale = segment_lr_scale;
            remap.insert(old, params.add(p)?);
        }
    }
    let mut blocks: Vec<Vec<UnitDef>> = base.blocks[..cut_block].to_vec();
    for u in blocks.iter_mut().flatten() {
        remap_unit(u, &remap);
    }
    let channels = blocks.last().and_then(|b| b.last()).map(|u| u.out_ch).expect("blocks are non-empty");

    let mut b = Builder {
        params: &mut params,
        seed,
    };
    let conv = b.conv("head.conv", 3, channels, channels)?;
    let bn = b.bn("head.bn", channels)?;
    let (dense_w, dense_b) = b.dense("head.dense", channels, n_classes)?;

    if let HeadInit::Identity { classes } = init {
        if cut_block != base.n_blocks() {
            return Err(ModelError::Spec("identity head is only defined after the last block".into()));
        }
        if classes.len() != n_classes || classes.iter().any(|&c| c >= base.n_outputs()) {
            return Err(ModelError::Spec(format!("identity head classes {classes:?} do not fit {n_classes} outputs")));
        }
        let w = &mut params.get_mut(conv).values;
        w.fill(0.0);
        for c in 0..channels {
            w[(channels + c) * channels + c] = 1.0;
        }
        let base_bn = base.final_bn.as_ref().expect("untruncated network has a final norm");
        for (dst, src) in [(bn.gamma, base_bn.gamma), (bn.beta, base_bn.beta), (bn.mean, base_bn.mean), (bn.var, base_bn.var)] {
            params.get_mut(dst).values = base.params.get(src).values.clone();
        }
        let (bw, bb) = (base.params.get(base.dense_w.unwrap()), base.params.get(base.dense_b.unwrap()));
        let n_base = bw.shape[1];
        let w = &mut params.get_mut(dense_w).values;
        for i in 0..channels {
            for (j, &c) in classes.iter().enumerate() {
                w[i * n_classes + j] = bw.values[i * n_base + c];
            }
        }
        params.get_mut(dense_b).values = classes.iter().map(|&c| bb.values[c]).collect();
    }

    let mut spec = base.spec.clone();
    spec.n_classes = n_classes;
    Ok(Network {
        spec,
        params,
        conv1: remap[&base.conv1],
        blocks,
        final_bn: None,
        dense_w: None,
        dense_b: None,
        head: Some(HeadDef { conv, bn, dense_w, dense_b }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tensor;
    use crate::model::{Attention, ForwardCtx, ModelSpec};

    fn base() -> Network {
        Network::build(&ModelSpec {
            depth: 14,
            attention: Attention::IseStandard,
            ..ModelSpec::default()
        })
        .unwrap()
    }

    fn input() -> Tensor<f32> {
        Tensor::new(&[3, 1, 512, 2], (0..3072).map(|i| (i as f32 * 0.05).sin()).collect())
    }

    #[test]
    fn cut_shapes() {
        let net = base();
        for (cut, shape) in [(1, vec![3, 1, 64, 16]), (2, vec![3, 1, 32, 32])] {
            let t = truncate_and_head(&net, cut, 2, &HeadInit::Random, 0.1, 1).unwrap();
            let mut ctx = ForwardCtx::infer();
            let y = t.forward(&input(), &mut ctx).unwrap();
            assert_eq!(y.shape(), &[3, 2]);
            let stage = ctx.stage_shapes().iter().find(|(n, _)| *n == format!("block{cut}")).unwrap();
            assert_eq!(stage.1, shape);
            assert!(t.params.iter().all(|p| p.name.starts_with("head.") == (p.lr_scale == 1.0)));
        }
    }

    #[test]
    fn identity_head_reproduces_base_logits() {
        let net = base();
        let t = truncate_and_head(&net, 4, 2, &HeadInit::Identity { classes: vec![2, 3] }, 0.1, 1).unwrap();
        let full = net.forward(&input(), &mut ForwardCtx::infer()).unwrap();
        let pair = t.forward(&input(), &mut ForwardCtx::infer()).unwrap();
        for b in 0..3 {
            for (j, c) in [2, 3].into_iter().enumerate() {
                let (a, e) = (pair.data()[b * 2 + j], full.data()[b * 5 + c]);
                assert!((a - e).abs() < 1e-5, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn invalid_cuts() {
        let net = base();
        assert!(truncate_and_head(&net, 5, 2, &HeadInit::Random, 0.1, 0).is_err());
        assert!(truncate_and_head(&net, 0, 2, &HeadInit::Random, 0.1, 0).is_err());
        assert!(truncate_and_head(&net, 2, 2, &HeadInit::Identity { classes: vec![2, 3] }, 0.1, 0).is_err());
    }
}
