use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::ops::{add, batchnorm_infer, batchnorm_train, conv1d, dense, global_avg_pool, maxpool1d, relu};
use crate::autograd::{Scalar, Tensor};

use super::ctx::{BnUpdate, Capture, ForwardCtx, Mode};
use super::ise::{ise_block, ise_hidden_width};
use super::params::{he_normal, ParamStore, Parameter};
use super::{block_multipliers, Attention, ModelError, ModelSpec, Result, BLOCK_WIDTHS};

pub const BN_EPS: f64 = 1e-5;
/// Weight of the old running statistic per update.
pub const BN_MOMENTUM: f64 = 0.99;

const STEM_FILTERS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BnDef {
    pub gamma: usize,
    pub beta: usize,
    pub mean: usize,
    pub var: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IseDef {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub channels: usize,
    pub hidden: usize,
}

/// One pre-activation bottleneck unit: `1x1 c -> 1x3 c (stride) -> 1x1 2c`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDef {
    pub block: usize,
    pub unit: usize,
    pub in_ch: usize,
    pub mid_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub(crate) bn1: BnDef,
    pub(crate) conv_a: usize,
    pub(crate) bn2: BnDef,
    pub(crate) conv_b: usize,
    pub(crate) bn3: BnDef,
    pub(crate) conv_c: usize,
    pub(crate) proj: Option<usize>,
    pub(crate) ise: Option<IseDef>,
}

impl UnitDef {
    pub fn has_projection(&self) -> bool {
        self.proj.is_some()
    }

    /// Channel count the ISE gate acts on, if the unit is gated.
    pub fn ise_channels(&self) -> Option<(usize, usize)> {
        self.ise.as_ref().map(|i| (i.channels, i.hidden))
    }
}

/// Replacement classifier appended after a truncated backbone:
/// `1x3 conv (C -> C) -> BN -> ReLU -> GAP -> dense`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HeadDef {
    pub conv: usize,
    pub bn: BnDef,
    pub dense_w: usize,
    pub dense_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSummary {
    pub block: usize,
    pub units: usize,
    /// `(c, c, 2c)` of every unit.
    pub bottleneck: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub params: ParamStore,
    pub(crate) conv1: usize,
    pub(crate) blocks: Vec<Vec<UnitDef>>,
    pub(crate) final_bn: Option<BnDef>,
    pub(crate) dense_w: Option<usize>,
    pub(crate) dense_b: Option<usize>,
    pub(crate) head: Option<HeadDef>,
}

pub(crate) struct Builder<'a> {
    pub params: &'a mut ParamStore,
    pub seed: u64,
}

fn name_stream(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl Builder<'_> {
    /// Each parameter draws from its own stream keyed by name, so adding or
    /// removing layers leaves the others' initial values unchanged.
    fn rng(&self, name: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(name_stream(name));
        rng
    }

    fn push(&mut self, name: String, shape: Vec<usize>, values: Vec<f32>, trainable: bool, decayable: bool) -> Result<usize> {
        self.params.add(Parameter {
            name,
            shape,
            values,
            trainable,
            decayable,
            lr_scale: 1.0,
        })
    }

    pub fn conv(&mut self, name: &str, k: usize, cin: usize, cout: usize) -> Result<usize> {
        let values = he_normal(&mut self.rng(name), k * cin, k * cin * cout);
        self.push(format!("{name}.w"), vec![1, k, cin, cout], values, true, true)
    }

    pub fn dense(&mut self, name: &str, n_in: usize, n_out: usize) -> Result<(usize, usize)> {
        let values = he_normal(&mut self.rng(name), n_in, n_in * n_out);
        let w = self.push(format!("{name}.w"), vec![n_in, n_out], values, true, true)?;
        let b = self.push(format!("{name}.b"), vec![n_out], vec![0.0; n_out], true, false)?;
        Ok((w, b))
    }

    pub fn bn(&mut self, name: &str, ch: usize) -> Result<BnDef> {
        Ok(BnDef {
            gamma: self.push(format!("{name}.gamma"), vec![ch], vec![1.0; ch], true, false)?,
            beta: self.push(format!("{name}.beta"), vec![ch], vec![0.0; ch], true, false)?,
            mean: self.push(format!("{name}.moving_mean"), vec![ch], vec![0.0; ch], false, false)?,
            var: self.push(format!("{name}.moving_var"), vec![ch], vec![1.0; ch], false, false)?,
        })
    }

    fn ise(&mut self, name: &str, channels: usize) -> Result<IseDef> {
        let (_, hidden) = ise_hidden_width(channels);
        let (w1, b1) = self.dense(&format!("{name}.fc1"), channels, hidden)?;
        let (w2, b2) = self.dense(&format!("{name}.fc2"), hidden, channels)?;
        Ok(IseDef {
            w1,
            b1,
            w2,
            b2,
            channels,
            hidden,
        })
    }
}

impl Network {
    /// Builds the backbone for `spec` with He-normal weights drawn from
    /// `spec.seed`.
    pub fn build(spec: &ModelSpec) -> Result<Network> {
        spec.validate()?;
        let multipliers = block_multipliers(spec.depth)?;
        let mut params = ParamStore::new();
        let mut b = Builder {
            params: &mut params,
            seed: spec.seed,
        };
        let conv1 = b.conv("conv1", 4, spec.lead_mode.n_leads(), STEM_FILTERS)?;
        let mut in_ch = STEM_FILTERS;
        let mut blocks = Vec::new();
        for (bi, (&units, &c)) in multipliers.iter().zip(&BLOCK_WIDTHS).enumerate() {
            let mut defs = Vec::new();
            for ui in 0..units {
                let name = format!("block{}.unit{}", bi + 1, ui + 1);
                let stride = if ui == 0 { 2 } else { 1 };
                let out_ch = 2 * c;
                let ise_ch = match spec.attention {
                    Attention::None => None,
                    Attention::IseStandard | Attention::IseIdentity => Some(out_ch),
                    Attention::IsePre => Some(in_ch),
                };
                defs.push(UnitDef {
                    block: bi + 1,
                    unit: ui + 1,
                    in_ch,
                    mid_ch: c,
                    out_ch,
                    stride,
                    bn1: b.bn(&format!("{name}.bn1"), in_ch)?,
                    conv_a: b.conv(&format!("{name}.conv_a"), 1, in_ch, c)?,
                    bn2: b.bn(&format!("{name}.bn2"), c)?,
                    conv_b: b.conv(&format!("{name}.conv_b"), 3, c, c)?,
                    bn3: b.bn(&format!("{name}.bn3"), c)?,
                    conv_c: b.conv(&format!("{name}.conv_c"), 1, c, out_ch)?,
                    proj: if stride != 1 || in_ch != out_ch {
                        Some(b.conv(&format!("{name}.proj"), 1, in_ch, out_ch)?)
                    } else {
                        None
                    },
                    ise: ise_ch.map(|ch| b.ise(&format!("{name}.ise"), ch)).transpose()?,
                });
                in_ch = out_ch;
            }
            if !defs.is_empty() {
                blocks.push(defs);
            }
        }
        let final_bn = b.bn("final_bn", in_ch)?;
        let (dense_w, dense_b) = b.dense("dense", in_ch, spec.n_classes)?;
        Ok(Network {
            spec: spec.clone(),
            params,
            conv1,
            blocks,
            final_bn: Some(final_bn),
            dense_w: Some(dense_w),
            dense_b: Some(dense_b),
            head: None,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn units(&self) -> impl Iterator<Item = &UnitDef> {
        self.blocks.iter().flatten()
    }

    pub fn is_truncated(&self) -> bool {
        self.head.is_some()
    }

    pub fn n_outputs(&self) -> usize {
        let id = self.head.as_ref().map(|h| h.dense_w).or(self.dense_w).expect("network has a classifier");
        self.params.get(id).shape[1]
    }

    pub fn block_summaries(&self) -> Vec<BlockSummary> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, units)| BlockSummary {
                block: i + 1,
                units: units.len(),
                bottleneck: units
                    .iter()
                    .map(|u| {
                        let ch = |id: usize| self.params.get(id).shape[3];
                        (ch(u.conv_a), ch(u.conv_b), ch(u.conv_c))
                    })
                    .collect(),
            })
            .collect()
    }

    /// Weighted layers on the main path: the stem, three convolutions per
    /// unit and the classifier (shortcut projections and gate calibrators
    /// are not counted).
    pub fn weighted_layer_count(&self) -> usize {
        let head = if self.head.is_some() { 2 } else { 1 };
        1 + 3 * self.units().count() + head
    }

    /// Sets every ISE calibrator weight and bias to zero.
    pub fn zero_ise_calibrators(&mut self) {
        let ids: Vec<usize> = self
            .units()
            .filter_map(|u| u.ise.as_ref())
            .flat_map(|i| [i.w1, i.b1, i.w2, i.b2])
            .collect();
        for id in ids {
            self.params.get_mut(id).values.fill(0.0);
        }
    }

    fn bn<T: Scalar>(&self, x: &Tensor<T>, def: &BnDef, ctx: &mut ForwardCtx<T>) -> Result<Tensor<T>> {
        let gamma = ctx.param(&self.params, def.gamma);
        let beta = ctx.param(&self.params, def.beta);
        match ctx.mode {
            Mode::Train => {
                let out = batchnorm_train(x, &gamma, &beta, BN_EPS)?;
                ctx.bn_updates.push(BnUpdate {
                    mean_id: def.mean,
                    var_id: def.var,
                    batch_mean: out.mean.iter().map(|v| v.as_f64()).collect(),
                    batch_var: out.var.iter().map(|v| v.as_f64()).collect(),
                });
                Ok(out.output)
            }
            Mode::Infer => {
                let conv = |id: usize| -> Vec<T> { self.params.get(id).values.iter().map(|v| T::of_f64(f64::from(*v))).collect() };
                Ok(batchnorm_infer(x, &gamma, &beta, &conv(def.mean), &conv(def.var), BN_EPS)?)
            }
        }
    }

    fn gate<T: Scalar>(&self, x: &Tensor<T>, unit: &UnitDef, ctx: &mut ForwardCtx<T>) -> Result<Tensor<T>> {
        let Some(def) = &unit.ise else {
            return Ok(x.clone());
        };
        let (w1, b1) = (ctx.param(&self.params, def.w1), ctx.param(&self.params, def.b1));
        let (w2, b2) = (ctx.param(&self.params, def.w2), ctx.param(&self.params, def.b2));
        let out = ise_block(x, &w1, &b1, &w2, &b2, ctx.gate_override)?;
        ctx.record_capture(Capture {
            block: unit.block,
            unit: unit.unit,
            channels: def.channels,
            gates: out.gates.to_vec(),
        });
        Ok(out.output)
    }

    pub(crate) fn unit_forward<T: Scalar>(&self, x: &Tensor<T>, u: &UnitDef, ctx: &mut ForwardCtx<T>) -> Result<Tensor<T>> {
        let attention = self.spec.attention;
        let pre = relu(&self.bn(x, &u.bn1, ctx)?);
        let branch_in = if attention == Attention::IsePre { self.gate(&pre, u, ctx)? } else { pre.clone() };
        let r = conv1d(&branch_in, &ctx.param(&self.params, u.conv_a), 1)?;
        let r = relu(&self.bn(&r, &u.bn2, ctx)?);
        let r = conv1d(&r, &ctx.param(&self.params, u.conv_b), u.stride)?;
        let r = relu(&self.bn(&r, &u.bn3, ctx)?);
        let mut r = conv1d(&r, &ctx.param(&self.params, u.conv_c), 1)?;
        if attention == Attention::IseStandard {
            r = self.gate(&r, u, ctx)?;
        }
        let mut shortcut = match u.proj {
            Some(id) => conv1d(&pre, &ctx.param(&self.params, id), u.stride)?,
            None => x.clone(),
        };
        if attention == Attention::IseIdentity {
            shortcut = self.gate(&shortcut, u, ctx)?;
        }
        Ok(add(&shortcut, &r)?)
    }

    /// Stem and residual blocks; returns the last block's feature map.
    pub fn features<T: Scalar>(&self, x: &Tensor<T>, ctx: &mut ForwardCtx<T>) -> Result<Tensor<T>> {
        let want = self.spec.lead_mode.n_leads();
        if x.shape().len() != 4 || x.shape()[1] != 1 || x.shape()[3] != want {
            return Err(ModelError::Spec(format!("input must be [B,1,W,{want}], got {:?}", x.shape())));
        }
        let mut h = conv1d(x, &ctx.param(&self.params, self.conv1), 2)?;
        ctx.record_stage("conv1", h.shape());
        h = maxpool1d(&h, 3, 2)?;
        for (i, block) in self.blocks.iter().enumerate() {
            for u in block {
                h = self.unit_forward(&h, u, ctx)?;
            }
            ctx.record_stage(format!("block{}", i + 1), h.shape());
        }
        Ok(h)
    }

    /// Logits `[B, n_outputs]` for input `[B, 1, W, n_leads]`.
    pub fn forward<T: Scalar>(&self, x: &Tensor<T>, ctx: &mut ForwardCtx<T>) -> Result<Tensor<T>> {
        let h = self.features(x, ctx)?;
        let (pooled, w, b) = match &self.head {
            Some(head) => {
                let h = conv1d(&h, &ctx.param(&self.params, head.conv), 1)?;
                ctx.record_stage("head_conv", h.shape());
                let h = relu(&self.bn(&h, &head.bn, ctx)?);
                (global_avg_pool(&h)?, head.dense_w, head.dense_b)
            }
            None => {
                let bn = self.final_bn.as_ref().expect("untruncated network has a final norm");
                let h = relu(&self.bn(&h, bn, ctx)?);
                (global_avg_pool(&h)?, self.dense_w.unwrap(), self.dense_b.unwrap())
            }
        };
        ctx.record_stage("pool", pooled.shape());
        let (w, b) = (ctx.param(&self.params, w), ctx.param(&self.params, b));
        Ok(dense(&pooled, &w, &b)?)
    }

    /// Folds the batch statistics collected by a train-mode forward into
    /// the running averages.
    pub fn apply_bn_updates<T: Scalar>(&mut self, ctx: &ForwardCtx<T>) {
        for u in &ctx.bn_updates {
            for (id, batch) in [(u.mean_id, &u.batch_mean), (u.var_id, &u.batch_var)] {
                for (r, b) in self.params.get_mut(id).values.iter_mut().zip(batch) {
                    *r = (BN_MOMENTUM * f64::from(*r) + (1.0 - BN_MOMENTUM) * b) as f32;
                }
            }
        }
    }

    /// Inference-mode logits for `n` beats stored back to back as
    /// `[n, W, n_leads]`, evaluated in chunks of `batch`.
    pub fn predict(&self, inputs: &[f32], width: usize, batch: usize) -> Result<Vec<f32>> {
        let c = self.spec.lead_mode.n_leads();
        let per = width * c;
        if per == 0 || inputs.len() % per != 0 {
            return Err(ModelError::Spec(format!("{} input values do not form [n,{width},{c}]", inputs.len())));
        }
        let mut out = Vec::with_capacity(inputs.len() / per * self.n_outputs());
        for chunk in inputs.chunks(per * batch.max(1)) {
            let x = Tensor::new(&[chunk.len() / per, 1, width, c], chunk.to_vec());
            let mut ctx = ForwardCtx::<f32>::infer();
            out.extend_from_slice(self.forward(&x, &mut ctx)?.data());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::LeadMode;

    fn spec(depth: u32, attention: Attention) -> ModelSpec {
        ModelSpec {
            depth,
            attention,
            ..ModelSpec::default()
        }
    }

    fn input(b: usize, c: usize) -> Tensor<f32> {
        Tensor::new(&[b, 1, 512, c], (0..b * 512 * c).map(|i| ((i as f32) * 0.013).sin()).collect())
    }

    #[test]
    fn logits_shape() {
        let net = Network::build(&spec(14, Attention::IseStandard)).unwrap();
        let mut ctx = ForwardCtx::infer();
        let y = net.forward(&input(8, 2), &mut ctx).unwrap();
        assert_eq!(y.shape(), &[8, 5]);
        let widths: Vec<usize> = ctx.stage_shapes().iter().map(|(_, s)| if s.len() == 4 { s[2] } else { 1 }).collect();
        assert_eq!(widths, vec![256, 64, 32, 16, 8, 1]);
    }

    #[test]
    fn single_lead_and_depth_11() {
        let mut s = spec(11, Attention::None);
        s.lead_mode = LeadMode::Mlii;
        let net = Network::build(&s).unwrap();
        assert_eq!(net.n_blocks(), 3);
        assert_eq!(net.weighted_layer_count(), 11);
        let y = net.forward(&input(2, 1), &mut ForwardCtx::infer()).unwrap();
        assert_eq!(y.shape(), &[2, 5]);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Network::build(&spec(17, Attention::IsePre)).unwrap();
        let b = Network::build(&spec(17, Attention::IsePre)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn neutral_gate_makes_variants_agree() {
        let x = input(2, 2);
        let outs: Vec<Vec<f32>> = [Attention::IseStandard, Attention::IsePre, Attention::IseIdentity, Attention::None]
            .into_iter()
            .map(|a| {
                let net = Network::build(&spec(11, a)).unwrap();
                let mut ctx = ForwardCtx::infer().with_gate_override(1.0);
                net.forward(&x, &mut ctx).unwrap().to_vec()
            })
            .collect();
        for o in &outs[1..] {
            assert_eq!(o, &outs[0]);
        }
    }

    #[test]
    fn zeroed_residual_branch_is_identity() {
        let net = Network::build(&spec(14, Attention::None)).unwrap();
        let mut net = net;
        let u = net.blocks[1][0].clone();
        for id in [u.conv_a, u.conv_b, u.conv_c] {
            net.params.get_mut(id).values.fill(0.0);
        }
        // second block's first unit projects, so compare against the projection alone
        let x = Tensor::new(&[1, 1, 64, 16], (0..1024).map(|i| (i as f32 * 0.1).cos()).collect());
        let mut ctx = ForwardCtx::infer();
        let y = net.unit_forward(&x, &u, &mut ctx).unwrap();
        let mut ctx = ForwardCtx::infer();
        let pre = relu(&net.bn(&x, &u.bn1, &mut ctx).unwrap());
        let proj = conv1d(&pre, &ctx.param(&net.params, u.proj.unwrap()), 2).unwrap();
        assert_eq!(y.data(), proj.data());
    }

    #[test]
    fn zeroed_identity_unit_passes_input_through() {
        let mut net = Network::build(&spec(17, Attention::None)).unwrap();
        let u = net.blocks[2][1].clone();
        assert!(!u.has_projection());
        for id in [u.conv_a, u.conv_b, u.conv_c] {
            net.params.get_mut(id).values.fill(0.0);
        }
        let x = Tensor::new(&[2, 1, 16, 64], (0..2048).map(|i| (i as f32 * 0.21).sin()).collect());
        let y = net.unit_forward(&x, &u, &mut ForwardCtx::infer()).unwrap();
        assert_eq!(y.data(), x.data());
    }
}
