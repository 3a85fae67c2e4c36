use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backbone::{Backbone, UnitCache};
use super::config::{BackboneConfig, Depth};
use crate::error::{Error, Result};
use crate::evidential::BetaEvidence;
use crate::numerics::{global_avg_pool, global_avg_pool_backward, Linear, NamedParam, Real, Tensor};

/// Output of one exit.
#[derive(Clone, Debug, PartialEq)]
pub struct StageOutput<T = f32> {
    pub stage: usize,
    pub features: Tensor<T>,
    /// Raw head outputs `(z1, z2)` per event.
    pub logits: Vec<[T; 2]>,
    pub evidence: Vec<BetaEvidence>,
}

/// Everything one stage's backward pass needs.
#[derive(Clone, Debug)]
pub struct StageTape<T = f32> {
    pub stage: usize,
    pub units: UnitCache<T>,
    pub pooled: Vec<T>,
    pub output: StageOutput<T>,
}

/// Shared backbone split into three nested stages, with `C` two-output
/// evidence heads after every stage.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeModel<T = f32> {
    pub config: BackboneConfig,
    pub backbone: Backbone<T>,
    /// `heads[stage][event]`, each a linear map `L -> 2`.
    pub heads: Vec<Vec<Linear<T>>>,
}

pub fn evidence_of<T: Real>(logits: &[[T; 2]]) -> Vec<BetaEvidence> {
    logits.iter().map(|z| BetaEvidence::from_logits(z[0].f64(), z[1].f64())).collect()
}

impl<T: Real> CascadeModel<T> {
    /// Kaiming-uniform weights and zero biases, drawn in unit order then
    /// head order from a ChaCha8 stream seeded with `seed`.
    pub fn build(cfg: &BackboneConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Backbone::new(cfg, &mut rng);
        let heads = (0..3).map(|_| (0..cfg.events).map(|_| Linear::new(cfg.channels, 2, &mut rng)).collect()).collect();
        Ok(Self { config: cfg.clone(), backbone, heads })
    }

    pub fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape() != self.config.input_shape {
            return Err(Error::dim(
                "cascade forward",
                format!("input {:?}, model expects {:?}", x.shape(), self.config.input_shape),
            ));
        }
        Ok(())
    }

    /// Heads of one stage applied to its feature map.
    pub fn head_logits(&self, stage: usize, features: &Tensor<T>) -> Result<(Vec<T>, Vec<[T; 2]>)> {
        let pooled = global_avg_pool(features)?;
        let logits =
            self.heads[stage].iter().map(|h| h.forward(&pooled).map(|z| [z[0], z[1]])).collect::<Result<Vec<_>>>()?;
        Ok((pooled, logits))
    }

    /// Runs one stage on the previous stage's feature map (or the input for stage 0).
    pub fn stage_forward(&self, stage: usize, x: &Tensor<T>) -> Result<StageOutput<T>> {
        let features = self.backbone.run_units(Backbone::<T>::stage_units(&self.config, stage), x)?;
        let (_, logits) = self.head_logits(stage, &features)?;
        Ok(StageOutput { stage, evidence: evidence_of(&logits), logits, features })
    }

    /// One output per stage up to and including `depth`.
    pub fn forward(&self, x: &Tensor<T>, depth: Depth) -> Result<Vec<StageOutput<T>>> {
        self.check_input(x)?;
        let mut outs: Vec<StageOutput<T>> = Vec::with_capacity(depth.stages());
        for s in 0..depth.stages() {
            let input = outs.last().map_or(x, |o| &o.features);
            let out = self.stage_forward(s, input)?;
            outs.push(out);
        }
        Ok(outs)
    }

    /// Stage forward keeping the activations for [`stage_backward`](Self::stage_backward).
    pub fn stage_forward_tape(&self, stage: usize, x: &Tensor<T>) -> Result<StageTape<T>> {
        let units = self.backbone.forward_units(Backbone::<T>::stage_units(&self.config, stage), x)?;
        let features = units.output().clone();
        let (pooled, logits) = self.head_logits(stage, &features)?;
        Ok(StageTape {
            stage,
            units,
            pooled,
            output: StageOutput { stage, evidence: evidence_of(&logits), logits, features },
        })
    }

    /// Accumulates gradients for one stage's heads and blocks.
    ///
    /// `grad_logits` is `dLoss/dz` per event; `grad_features` optionally
    /// carries gradient arriving from the next stage. Returns the gradient
    /// with respect to the stage input.
    pub fn stage_backward(
        &mut self,
        tape: &StageTape<T>,
        grad_logits: &[[T; 2]],
        grad_features: Option<Tensor<T>>,
    ) -> Result<Tensor<T>> {
        if grad_logits.len() != self.config.events {
            return Err(Error::dim(
                "stage backward",
                format!("{} logit gradients for {} events", grad_logits.len(), self.config.events),
            ));
        }
        let mut d_pooled = vec![T::zero(); tape.pooled.len()];
        for (head, g) in self.heads[tape.stage].iter_mut().zip(grad_logits) {
            let dx = head.backward(&tape.pooled, g);
            for (a, b) in d_pooled.iter_mut().zip(dx) {
                *a += b;
            }
        }
        let mut g = global_avg_pool_backward(tape.output.features.shape(), &d_pooled);
        if let Some(extra) = grad_features {
            for (a, &b) in g.data_mut().iter_mut().zip(extra.data()) {
                *a += b;
            }
        }
        self.backbone.backward_units(&tape.units, g)
    }

    /// Trainable tensors of the given stages (blocks plus heads), named
    /// `stem.*`, `blocks.{b}.{part}.*`, `heads.{s}.{c}.*`.
    pub fn stage_params_mut(&mut self, stages: &[usize]) -> Vec<NamedParam<'_, T>> {
        let cfg = &self.config;
        let mut out = Vec::new();
        let ranges: Vec<_> = stages.iter().map(|&s| Backbone::<T>::stage_units(cfg, s)).collect();
        let lo = ranges.iter().map(|r| r.start).min().unwrap_or(0);
        let hi = ranges.iter().map(|r| r.end).max().unwrap_or(0);
        let contiguous = stages.windows(2).all(|w| w[1] == w[0] + 1);
        assert!(contiguous, "stages must be consecutive");
        out.extend(self.backbone.params_mut(lo..hi));
        for (s, heads) in self.heads.iter_mut().enumerate().filter(|(s, _)| stages.contains(s)) {
            for (c, h) in heads.iter_mut().enumerate() {
                out.push((format!("heads.{s}.{c}.weight"), &mut h.weight));
                out.push((format!("heads.{s}.{c}.bias"), &mut h.bias));
            }
        }
        out
    }

    /// All tensors in serialization order.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = self.backbone.params(0..self.backbone.num_units());
        for (s, heads) in self.heads.iter().enumerate() {
            for (c, h) in heads.iter().enumerate() {
                out.push((format!("heads.{s}.{c}.weight"), &h.weight));
                out.push((format!("heads.{s}.{c}.bias"), &h.bias));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<NamedParam<'_, T>> {
        self.stage_params_mut(&[0, 1, 2])
    }

    pub fn zero_grad(&mut self) {
        self.backbone.zero_grad();
        for h in self.heads.iter_mut().flatten() {
            h.weight.zero_grad();
            h.bias.zero_grad();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|(_, t)| t.is_finite())
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> CascadeModel<U> {
        CascadeModel {
            config: self.config.clone(),
            backbone: self.backbone.cast(),
            heads: self.heads.iter().map(|hs| hs.iter().map(Linear::cast).collect()).collect(),
        }
    }
}

pub fn build_model(cfg: &BackboneConfig, seed: u64) -> Result<CascadeModel<f32>> {
    CascadeModel::build(cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::count_params;

    fn cfg() -> BackboneConfig {
        BackboneConfig::new(8, 4, [1, 6, 7], 3).off_grid()
    }

    fn input(seed: u64) -> Tensor<f32> {
        let data = (0..42).map(|i| (((i as u64 * 2654435761 + seed * 97) % 1000) as f32 / 500.0) - 1.0).collect();
        Tensor::from_vec(&[1, 6, 7], data).unwrap()
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_model(&cfg(), 11).unwrap();
        let b = build_model(&cfg(), 11).unwrap();
        let c = build_model(&cfg(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn nesting_invariant() {
        let m = build_model(&cfg(), 3).unwrap();
        for s in 0..20 {
            let x = input(s);
            let deep = m.forward(&x, Depth::Deep).unwrap();
            let shallow = m.forward(&x, Depth::Shallow).unwrap();
            assert_eq!(deep.len(), 3);
            assert_eq!(shallow.len(), 1);
            assert_eq!(deep[0], shallow[0]);
            for o in &deep {
                assert_eq!(o.features.shape(), &[8, 6, 7]);
                assert_eq!(o.evidence.len(), 3);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_evidence() {
        let mut m = build_model(&cfg(), 3).unwrap();
        for (_, p) in m.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        for o in m.forward(&input(1), Depth::Deep).unwrap() {
            for ev in o.evidence {
                assert_eq!(ev.uncertainty(), 1.0);
            }
        }
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let m = build_model(&cfg(), 3).unwrap();
        assert!(m.forward(&Tensor::zeros(&[1, 6, 8]), Depth::Shallow).is_err());
    }

    #[test]
    fn param_listing_is_complete() {
        let mut m = build_model(&cfg(), 3).unwrap();
        assert_eq!(m.num_params(), count_params(&m.config));
        let names: Vec<String> = m.params().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = m.params_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        let stage1: Vec<String> = m.stage_params_mut(&[1]).into_iter().map(|(n, _)| n).collect();
        assert!(stage1.iter().all(|n| n.starts_with("blocks.1.") || n.starts_with("heads.1.")));
    }

    #[test]
    fn shallow_forward_leaves_deeper_weights_unread() {
        // corrupting deeper stages cannot affect a shallow pass
        let m = build_model(&cfg(), 5).unwrap();
        let mut broken = m.clone();
        for b in &mut broken.backbone.blocks[1..] {
            b.expand.weight.data_mut().iter_mut().for_each(|v| *v = f32::NAN);
        }
        let x = input(2);
        assert_eq!(m.forward(&x, Depth::Shallow).unwrap(), broken.forward(&x, Depth::Shallow).unwrap());
    }
}
