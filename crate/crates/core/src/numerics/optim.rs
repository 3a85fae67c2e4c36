use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// A parameter tensor together with its stable name.
pub type NamedParam<'a, T> = (String, &'a mut Tensor<T>);

/// Optimizer hyper-parameters plus per-parameter Adam moments.
#[derive(Clone, Debug)]
pub struct OptimizerState<T = f32> {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update using the gradients stored on each parameter.
    ///
    /// Parameters must be passed in the same order on every call.
    pub fn step(&mut self, params: &mut [NamedParam<'_, T>]) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, p) in params.iter() {
            let g = p.grad().ok_or_else(|| Error::Config(format!("parameter `{name}` does not track gradients")))?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        if self.kind == OptimizerKind::Adam {
            if self.m.is_empty() {
                self.m = params.iter().map(|(_, p)| vec![T::zero(); p.len()]).collect();
                self.v = self.m.clone();
            } else if self.m.len() != params.len()
                || self.m.iter().zip(params.iter()).any(|(m, (_, p))| m.len() != p.len())
            {
                return Err(Error::dim("optimizer_step", "parameter set changed between steps"));
            }
        }
        self.step += 1;
        let lr = T::of(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (_, p) in params.iter_mut() {
                    let (w, g) = p.value_and_grad_mut();
                    let g = g.expect("checked above");
                    for (wi, &gi) in w.iter_mut().zip(g) {
                        *wi -= lr * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
                let bc1 = T::of(1.0 - self.beta1.powi(self.step as i32));
                let bc2 = T::of(1.0 - self.beta2.powi(self.step as i32));
                let eps = T::of(self.eps);
                for (k, (_, p)) in params.iter_mut().enumerate() {
                    let (w, g) = p.value_and_grad_mut();
                    let g = g.expect("checked above");
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..w.len() {
                        m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                        v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        w[i] -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
