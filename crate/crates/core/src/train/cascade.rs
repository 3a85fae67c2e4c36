//! Evidential training of the cascade: per-sample gradients through a range
//! of stages, the three-phase cascade schedule, and deep-exit-only training
//! used to score search candidates.

use serde::{Deserialize, Serialize};

use super::hyper::{batches, mix_seed, split_validation, EarlyStop, Hyper};
use crate::error::{Error, Result};
use crate::eval::metrics::pooled_accuracy;
use crate::evidential::{edl_loss_logits, BetaEvidence};
use crate::model::{CascadeModel, StageTape};
use crate::numerics::{OptimizerState, Real, Tensor};
use crate::signal::FeatureSet;

/// Which exits contribute to the loss when back-propagating `first..=last`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossExits {
    /// Every exit in the range.
    All,
    /// Only the deepest exit in the range.
    Last,
}

/// Runs stages `first..=last` on `stage_input`, adds the gradient of
/// `scale · Σ loss` to every touched parameter, and returns the summed
/// (unscaled) loss over the contributing exits and events.
pub fn accumulate_sample<T: Real>(
    model: &mut CascadeModel<T>,
    stage_input: &Tensor<T>,
    first: usize,
    last: usize,
    exits: LossExits,
    labels: &[u8],
    lambda: f64,
    scale: f64,
) -> Result<f64> {
    let mut tapes: Vec<StageTape<T>> = Vec::with_capacity(last + 1 - first);
    for s in first..=last {
        let input = tapes.last().map_or(stage_input, |t| &t.output.features);
        let tape = model.stage_forward_tape(s, input)?;
        tapes.push(tape);
    }
    let mut loss = 0.0;
    let mut grad_features: Option<Tensor<T>> = None;
    for tape in tapes.iter().rev() {
        let counts = exits == LossExits::All || tape.stage == last;
        let grads: Vec<[T; 2]> = if counts {
            let logits: Vec<[f64; 2]> = tape.output.logits.iter().map(|z| [z[0].f64(), z[1].f64()]).collect();
            let (l, g) = edl_loss_logits(&logits, labels, lambda, scale)?;
            loss += l;
            g.iter().map(|d| [T::of(d[0]), T::of(d[1])]).collect()
        } else {
            vec![[T::zero(); 2]; labels.len()]
        };
        grad_features = Some(model.stage_backward(tape, &grads, grad_features.take())?);
    }
    Ok(loss)
}

/// Summed loss only, for finite-difference checks.
pub fn sample_loss<T: Real>(
    model: &CascadeModel<T>,
    stage_input: &Tensor<T>,
    first: usize,
    last: usize,
    exits: LossExits,
    labels: &[u8],
    lambda: f64,
) -> Result<f64> {
    let mut h = stage_input.clone();
    let mut loss = 0.0;
    for s in first..=last {
        let out = model.stage_forward(s, &h)?;
        if exits == LossExits::All || s == last {
            let logits: Vec<[f64; 2]> = out.logits.iter().map(|z| [z[0].f64(), z[1].f64()]).collect();
            loss += edl_loss_logits(&logits, labels, lambda, 1.0)?.0;
        }
        h = out.features;
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lambda: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub phases: Vec<PhaseReport>,
}

/// Margin of the head prior: the starting evidence total is `(1 + m) / min(π, 1 − π)`.
pub const HEAD_PRIOR_MARGIN: f64 = 1.0;

/// Restarts a stage's heads at the label prior: zero weights, biases chosen
/// so every sample starts with `p̂ = π` (the smoothed positive rate) and both
/// evidence outputs strictly positive. Trained features can be far larger
/// than at init, and random head weights on them leave many ReLU outputs
/// dead for every sample before the first step.
pub fn reset_heads_to_prior(model: &mut CascadeModel<f32>, stage: usize, labels: &[Vec<u8>]) {
    let n = labels.len() as f64;
    for (c, head) in model.heads[stage].iter_mut().enumerate() {
        let pos = labels.iter().filter(|y| y[c] == 1).count() as f64;
        let pi = ((pos + 0.5) / (n + 1.0)).clamp(0.01, 0.99);
        let strength = (1.0 + HEAD_PRIOR_MARGIN) / pi.min(1.0 - pi);
        head.weight.data_mut().iter_mut().for_each(|w| *w = 0.0);
        let b = head.bias.data_mut();
        b[0] = (pi * strength - 1.0) as f32;
        b[1] = ((1.0 - pi) * strength - 1.0) as f32;
    }
}

/// Feature maps entering `stage`, computed with the current weights.
fn stage_inputs(model: &CascadeModel<f32>, inputs: &[Tensor<f32>], stage: usize) -> Result<Vec<Tensor<f32>>> {
    inputs
        .iter()
        .map(|x| {
            model.check_input(x)?;
            let mut h = x.clone();
            for s in 0..stage {
                h = model.stage_forward(s, &h)?.features;
            }
            Ok(h)
        })
        .collect()
}

/// Mean loss (at full λ) and pooled accuracy of exit `last` on a set.
fn validate(
    model: &CascadeModel<f32>,
    inputs: &[Tensor<f32>],
    labels: &[Vec<u8>],
    first: usize,
    last: usize,
    exits: LossExits,
    lambda: f64,
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut p_hat = Vec::with_capacity(inputs.len());
    for (x, y) in inputs.iter().zip(labels) {
        let mut h = x.clone();
        for s in first..=last {
            let out = model.stage_forward(s, &h)?;
            if exits == LossExits::All || s == last {
                let logits: Vec<[f64; 2]> = out.logits.iter().map(|z| [z[0] as f64, z[1] as f64]).collect();
                loss += edl_loss_logits(&logits, y, lambda, 1.0)?.0;
            }
            if s == last {
                p_hat.push(out.evidence.iter().map(BetaEvidence::prob).collect::<Vec<f64>>());
            }
            h = out.features;
        }
    }
    let terms = (inputs.len() * labels.first().map_or(1, Vec::len)) as f64;
    Ok((loss / terms, pooled_accuracy(&p_hat, labels)))
}

/// Which checkpoint a run keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Lowest validation loss.
    Loss,
    /// Highest validation accuracy, lower loss breaking ties.
    Accuracy,
}

/// Trains stages `first..=last` jointly with one optimizer, inputs taken
/// at stage `first`, early stopping on validation loss.
#[allow(clippy::too_many_arguments)]
fn run_phase(
    model: &mut CascadeModel<f32>,
    train: (&[Tensor<f32>], &[Vec<u8>]),
    val: (&[Tensor<f32>], &[Vec<u8>]),
    first: usize,
    last: usize,
    exits: LossExits,
    hyper: &Hyper,
    phase: usize,
    selection: Selection,
) -> Result<PhaseReport> {
    let (xs, ys) = train;
    let events = model.config.events;
    let n_exits = if exits == LossExits::All { last + 1 - first } else { 1 };
    let stages: Vec<usize> = (first..=last).collect();
    let mut opt = OptimizerState::<f32>::adam(hyper.lr);
    let mut stop = EarlyStop::new(hyper.patience);
    let mut best_model = model.clone();
    let mut best_key = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_acc = 0.0;
    let mut history = Vec::new();
    for epoch in 0..hyper.max_epochs {
        let lambda = hyper.loss.lambda_at(epoch);
        let mut epoch_loss = 0.0;
        for batch in batches(xs.len(), hyper.batch_size, mix_seed(hyper.seed, phase as u64, epoch as u64)) {
            model.zero_grad();
            let scale = 1.0 / (batch.len() * events * n_exits) as f64;
            for &i in &batch {
                epoch_loss += accumulate_sample(model, &xs[i], first, last, exits, &ys[i], lambda, scale)?;
            }
            if !epoch_loss.is_finite() {
                return Err(Error::Diverged { phase });
            }
            let mut params = model.stage_params_mut(&stages);
            opt.step(&mut params).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Diverged { phase },
                other => other,
            })?;
        }
        if !model.is_finite() {
            return Err(Error::Diverged { phase });
        }
        let (val_loss, val_accuracy) = validate(model, val.0, val.1, first, last, exits, hyper.loss.lambda)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { phase });
        }
        history.push(EpochStats {
            epoch,
            lambda,
            train_loss: epoch_loss / (xs.len() * events * n_exits) as f64,
            val_loss,
            val_accuracy,
        });
        let improved_loss = stop.observe(epoch, val_loss);
        let key = (val_accuracy, val_loss);
        let keep = match selection {
            Selection::Loss => improved_loss,
            Selection::Accuracy => key.0 > best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1),
        };
        if keep {
            best_key = key;
            best_acc = val_accuracy;
            best_model = model.clone();
        }
        if stop.should_stop() {
            break;
        }
    }
    *model = best_model;
    Ok(PhaseReport {
        phase,
        epochs_run: history.len(),
        best_epoch: stop.best_epoch,
        best_val_loss: stop.best,
        best_val_accuracy: best_acc,
        history,
    })
}

/// Three-phase cascade training. Phase `s` fits stage `s` (blocks and its
/// `C` heads) with a fresh optimizer; with `hyper.freeze` earlier stages are
/// fixed and their output is precomputed, otherwise phase `s` updates stages
/// `0..=s` on the summed loss of exits `0..=s`.
pub fn cascade_train(model: &mut CascadeModel<f32>, data: &FeatureSet, hyper: &Hyper) -> Result<CascadeReport> {
    hyper.validate()?;
    let (train, val) = split_validation(data, hyper.val_fraction, hyper.seed)?;
    let mut phases = Vec::with_capacity(3);
    for phase in 0..3 {
        if hyper.prior_heads {
            reset_heads_to_prior(model, phase, &train.labels);
        }
        let report = if hyper.freeze {
            let xs = stage_inputs(model, &train.inputs, phase)?;
            let vs = stage_inputs(model, &val.inputs, phase)?;
            run_phase(
                model,
                (&xs, &train.labels),
                (&vs, &val.labels),
                phase,
                phase,
                LossExits::All,
                hyper,
                phase,
                Selection::Loss,
            )?
        } else {
            for x in &train.inputs {
                model.check_input(x)?;
            }
            run_phase(
                model,
                (&train.inputs, &train.labels),
                (&val.inputs, &val.labels),
                0,
                phase,
                LossExits::All,
                hyper,
                phase,
                Selection::Loss,
            )?
        };
        phases.push(report);
    }
    Ok(CascadeReport { phases })
}

/// End-to-end training of the whole backbone on the deep exit only, as
/// used to score search candidates. Keeps the best-validation-accuracy
/// checkpoint and returns it with that accuracy.
pub fn train_deep_exit(
    model: &mut CascadeModel<f32>,
    train: &FeatureSet,
    val: &FeatureSet,
    hyper: &Hyper,
) -> Result<PhaseReport> {
    hyper.validate()?;
    for x in train.inputs.iter().chain(&val.inputs) {
        model.check_input(x)?;
    }
    if hyper.prior_heads {
        reset_heads_to_prior(model, 2, &train.labels);
    }
    run_phase(
        model,
        (&train.inputs, &train.labels),
        (&val.inputs, &val.labels),
        0,
        2,
        LossExits::Last,
        hyper,
        2,
        Selection::Accuracy,
    )
}
