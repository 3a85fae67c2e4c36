use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backbone::{Backbone, UnitCache};
use super::config::BackboneConfig;
use crate::error::{Error, Result};
use crate::numerics::{global_avg_pool, global_avg_pool_backward, softmax, Linear, NamedParam, Real, Tensor};

/// Deep-only backbone with a single `C`-way softmax classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxNet<T = f32> {
    pub config: BackboneConfig,
    pub backbone: Backbone<T>,
    pub head: Linear<T>,
}

#[derive(Clone, Debug)]
pub struct SoftmaxTape<T = f32> {
    pub units: UnitCache<T>,
    pub pooled: Vec<T>,
    pub logits: Vec<T>,
}

impl<T: Real> SoftmaxNet<T> {
    pub fn build(cfg: &BackboneConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if cfg.events < 2 {
            return Err(Error::Config("a softmax classifier needs at least 2 classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Backbone::new(cfg, &mut rng);
        let head = Linear::new(cfg.channels, cfg.events, &mut rng);
        Ok(Self { config: cfg.clone(), backbone, head })
    }

    pub fn forward_tape(&self, x: &Tensor<T>) -> Result<SoftmaxTape<T>> {
        if x.shape() != self.config.input_shape {
            return Err(Error::dim(
                "softmax forward",
                format!("input {:?}, model expects {:?}", x.shape(), self.config.input_shape),
            ));
        }
        let units = self.backbone.forward_units(0..self.backbone.num_units(), x)?;
        let pooled = global_avg_pool(units.output())?;
        let logits = self.head.forward(&pooled)?;
        Ok(SoftmaxTape { units, pooled, logits })
    }

    pub fn logits(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.forward_tape(x)?.logits)
    }

    /// Class probabilities.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn backward(&mut self, tape: &SoftmaxTape<T>, grad_logits: &[T]) -> Result<()> {
        let d_pooled = self.head.backward(&tape.pooled, grad_logits);
        let g = global_avg_pool_backward(tape.units.output().shape(), &d_pooled);
        self.backbone.backward_units(&tape.units, g)?;
        Ok(())
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = self.backbone.params(0..self.backbone.num_units());
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn params_mut(&mut self) -> Vec<NamedParam<'_, T>> {
        let n = self.backbone.num_units();
        let mut out = self.backbone.params_mut(0..n);
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out
    }

    pub fn zero_grad(&mut self) {
        self.backbone.zero_grad();
        self.head.weight.zero_grad();
        self.head.bias.zero_grad();
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|(_, t)| t.is_finite())
    }

    pub fn cast<U: Real>(&self) -> SoftmaxNet<U> {
        SoftmaxNet { config: self.config.clone(), backbone: self.backbone.cast(), head: self.head.cast() }
    }
}
