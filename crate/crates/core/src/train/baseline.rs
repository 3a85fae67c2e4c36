//! Softmax baselines: a single network, a deep ensemble and test-time
//! jitter augmentation, plus their bundle file.

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cascade::{EpochStats, PhaseReport};
use super::hyper::{batches, mix_seed, split_validation, EarlyStop, Hyper};
use crate::error::{Error, Result};
use crate::eval::metrics::pooled_accuracy;
use crate::model::format::write_file;
use crate::model::{BackboneConfig, Container, SoftmaxNet, Writer, KIND_BASELINE};
use crate::numerics::{softmax, OptimizerState, Tensor};
use crate::signal::{FeatureSet, Preprocess};

pub const ENSEMBLE_SIZE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    SoftmaxSingle,
    DeepEnsemble,
    InputAug,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SoftmaxSingle => "softmax_single",
            Self::DeepEnsemble => "deep_ensemble",
            Self::InputAug => "input_aug",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax_single" => Ok(Self::SoftmaxSingle),
            "deep_ensemble" => Ok(Self::DeepEnsemble),
            "input_aug" => Ok(Self::InputAug),
            other => Err(Error::Config(format!("unknown baseline `{other}` (softmax_single|deep_ensemble|input_aug)"))),
        }
    }
}

/// Test-time jitter: `copies` noisy versions of the model input, each
/// perturbed by `N(0, sigma²)` per element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugConfig {
    pub copies: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for AugConfig {
    fn default() -> Self {
        Self { copies: 5, sigma: 0.03, seed: 0 }
    }
}

impl AugConfig {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 || !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("augmentation needs >= 1 copy and finite sigma >= 0, got {self:?}")));
        }
        Ok(())
    }

    /// Jittered copies of `x` for sample `index`; the stream depends only on
    /// `(seed, index, copy)`.
    pub fn jitter(&self, x: &Tensor<f32>, index: usize) -> Vec<Tensor<f32>> {
        (0..self.copies)
            .map(|k| {
                if self.sigma == 0.0 {
                    return x.clone();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, index as u64, k as u64));
                let noise = Normal::new(0.0, self.sigma).expect("validated sigma");
                let mut out = x.clone();
                for v in out.data_mut() {
                    *v = (*v as f64 + noise.sample(&mut rng)) as f32;
                }
                out
            })
            .collect()
    }
}

/// One or more softmax networks sharing a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub members: Vec<SoftmaxNet<f32>>,
    pub aug: Option<AugConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BaselineMeta {
    config: BackboneConfig,
    preprocess: Option<Preprocess>,
    baseline: BaselineKind,
    members: usize,
    aug: Option<AugConfig>,
}

impl Baseline {
    pub fn config(&self) -> &BackboneConfig {
        &self.members[0].config
    }

    pub fn num_params(&self) -> usize {
        self.members.iter().map(SoftmaxNet::num_params).sum()
    }

    /// Mean class probabilities over members (and jittered copies for
    /// `InputAug`). `index` seeds the jitter.
    pub fn predict(&self, x: &Tensor<f32>, index: usize) -> Result<Vec<f64>> {
        let inputs = match (&self.aug, self.kind) {
            (Some(aug), BaselineKind::InputAug) => aug.jitter(x, index),
            _ => vec![x.clone()],
        };
        let classes = self.config().events;
        let mut mean = vec![0.0; classes];
        let mut count = 0usize;
        for net in &self.members {
            for xi in &inputs {
                for (m, p) in mean.iter_mut().zip(net.predict(xi)?) {
                    *m += p as f64;
                }
                count += 1;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        Ok(mean)
    }

    pub fn to_bytes(&self, preprocess: Option<&Preprocess>) -> Result<Vec<u8>> {
        let meta = BaselineMeta {
            config: self.config().clone(),
            preprocess: preprocess.cloned(),
            baseline: self.kind,
            members: self.members.len(),
            aug: self.aug,
        };
        let mut w = Writer::new(KIND_BASELINE, &meta)?;
        for (k, net) in self.members.iter().enumerate() {
            net.write_into(&mut w, &format!("members.{k}."))?;
        }
        w.finish()
    }

    pub fn from_container(c: &Container) -> Result<(Self, Option<Preprocess>)> {
        c.expect_kind(KIND_BASELINE)?;
        let meta: BaselineMeta = c.meta()?;
        if meta.members == 0 {
            return Err(Error::Header("baseline bundle without members".into()));
        }
        let mut used = Vec::new();
        let mut members = Vec::with_capacity(meta.members);
        for k in 0..meta.members {
            let (net, names) = SoftmaxNet::read_from(c, &format!("members.{k}."), &meta.config)?;
            used.extend(names);
            members.push(net);
        }
        c.ensure_names(&used)?;
        Ok((Self { kind: meta.baseline, members, aug: meta.aug }, meta.preprocess))
    }

    pub fn save(&self, path: &Path, preprocess: Option<&Preprocess>) -> Result<()> {
        write_file(path, &self.to_bytes(preprocess)?)
    }

    pub fn load(path: &Path) -> Result<(Self, Option<Preprocess>)> {
        Self::from_container(&Container::read(path)?)
    }
}

/// Label row normalized to a distribution; an all-zero row becomes uniform.
fn target(labels: &[u8]) -> Vec<f64> {
    let total: f64 = labels.iter().map(|&y| y as f64).sum();
    if total == 0.0 {
        return vec![1.0 / labels.len() as f64; labels.len()];
    }
    labels.iter().map(|&y| y as f64 / total).collect()
}

fn cross_entropy(p: &[f32], t: &[f64]) -> f64 {
    -p.iter().zip(t).filter(|(_, &ti)| ti > 0.0).map(|(&pi, &ti)| ti * (pi as f64).max(1e-12).ln()).sum::<f64>()
}

fn validate_softmax(net: &SoftmaxNet<f32>, set: &FeatureSet) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut probs = Vec::with_capacity(set.len());
    for (x, y) in set.inputs.iter().zip(&set.labels) {
        let p = net.predict(x)?;
        loss += cross_entropy(&p, &target(y));
        probs.push(p.iter().map(|&v| v as f64).collect::<Vec<f64>>());
    }
    Ok((loss / set.len() as f64, pooled_accuracy(&probs, &set.labels)))
}

/// Cross-entropy training against normalized label rows with Adam and early
/// stopping on validation loss; keeps the best-loss checkpoint.
pub fn train_softmax(
    net: &mut SoftmaxNet<f32>,
    train: &FeatureSet,
    val: &FeatureSet,
    hyper: &Hyper,
) -> Result<PhaseReport> {
    hyper.validate()?;
    let mut opt = OptimizerState::<f32>::adam(hyper.lr);
    let mut stop = EarlyStop::new(hyper.patience);
    let mut best = net.clone();
    let mut best_acc = 0.0;
    let mut history = Vec::new();
    for epoch in 0..hyper.max_epochs {
        let mut epoch_loss = 0.0;
        for batch in batches(train.len(), hyper.batch_size, mix_seed(hyper.seed, 3, epoch as u64)) {
            net.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in &batch {
                let tape = net.forward_tape(&train.inputs[i])?;
                let p = softmax(&tape.logits);
                let t = target(&train.labels[i]);
                epoch_loss += cross_entropy(&p, &t);
                let g: Vec<f32> = p.iter().zip(&t).map(|(&pi, &ti)| ((pi as f64 - ti) * scale) as f32).collect();
                net.backward(&tape, &g)?;
            }
            if !epoch_loss.is_finite() {
                return Err(Error::Diverged { phase: 0 });
            }
            opt.step(&mut net.params_mut()).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Diverged { phase: 0 },
                other => other,
            })?;
        }
        if !net.is_finite() {
            return Err(Error::Diverged { phase: 0 });
        }
        let (val_loss, val_accuracy) = validate_softmax(net, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { phase: 0 });
        }
        history.push(EpochStats {
            epoch,
            lambda: 0.0,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
            val_accuracy,
        });
        if stop.observe(epoch, val_loss) {
            best = net.clone();
            best_acc = val_accuracy;
        }
        if stop.should_stop() {
            break;
        }
    }
    *net = best;
    Ok(PhaseReport {
        phase: 0,
        epochs_run: history.len(),
        best_epoch: stop.best_epoch,
        best_val_loss: stop.best,
        best_val_accuracy: best_acc,
        history,
    })
}

/// Trains a baseline of the given kind. Ensemble member `k` is built and
/// shuffled with seed `hyper.seed + k`.
pub fn train_baseline(
    kind: BaselineKind,
    cfg: &BackboneConfig,
    data: &FeatureSet,
    hyper: &Hyper,
    aug: AugConfig,
) -> Result<(Baseline, Vec<PhaseReport>)> {
    hyper.validate()?;
    aug.validate()?;
    let (train, val) = split_validation(data, hyper.val_fraction, hyper.seed)?;
    let n = if kind == BaselineKind::DeepEnsemble { ENSEMBLE_SIZE } else { 1 };
    let mut members = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(n);
    for k in 0..n as u64 {
        let h = Hyper { seed: hyper.seed + k, ..hyper.clone() };
        let mut net = SoftmaxNet::build(cfg, h.seed)?;
        reports.push(train_softmax(&mut net, &train, &val, &h)?);
        members.push(net);
    }
    let aug = (kind == BaselineKind::InputAug).then_some(aug);
    Ok((Baseline { kind, members, aug }, reports))
}
