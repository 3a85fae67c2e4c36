use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::LossConfig;
use crate::signal::{Dataset, FeatureSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    /// Upper bound on epochs per training run (per phase for cascades).
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Stratified share of the training data held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
    pub loss: LossConfig,
    /// Freeze earlier stages during later cascade phases.
    pub freeze: bool,
    /// Restart each phase's heads at the label prior before training it.
    pub prior_heads: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            max_epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            patience: 5,
            val_fraction: 0.1,
            seed: 0,
            loss: LossConfig::default(),
            freeze: true,
            prior_heads: true,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("validation fraction {} outside [0, 1)", self.val_fraction)));
        }
        Ok(())
    }
}

/// Stratified `(train, validation)` split of a feature set. With a zero
/// fraction the validation set is the training set itself.
pub fn split_validation(set: &FeatureSet, fraction: f64, seed: u64) -> Result<(FeatureSet, FeatureSet)> {
    if set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if fraction == 0.0 {
        return Ok((set.clone(), set.clone()));
    }
    let labels: Vec<&[u8]> = set.labels.iter().map(Vec::as_slice).collect();
    let (kept, held) = Dataset::stratified_indices(&labels, fraction, seed);
    if kept.is_empty() || held.is_empty() {
        return Err(Error::Data(format!("{} samples too few for a {fraction} validation split", set.len())));
    }
    Ok((set.select(&kept), set.select(&held)))
}

/// Mini-batches of a seeded permutation of `0..n`.
pub fn batches(n: usize, batch: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

/// Independent stream id for `(seed, phase, epoch)`.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^ (x >> 33)
}

/// Tracks the best validation score and patience.
#[derive(Clone, Debug)]
pub struct EarlyStop {
    pub best: f64,
    pub best_epoch: usize,
    patience: usize,
    since: usize,
}

impl EarlyStop {
    pub fn new(patience: usize) -> Self {
        Self { best: f64::INFINITY, best_epoch: 0, patience, since: 0 }
    }

    /// Records a score (lower is better); returns true when it improved.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score < self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.since = 0;
            true
        } else {
            self.since += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since >= self.patience
    }
}
