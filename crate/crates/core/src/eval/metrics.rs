//! Accuracy, Brier score, NLL and expected calibration error.
//!
//! Brier is summed over classes, so a confidently wrong binary prediction
//! scores 2. NLL clamps the true-class probability at `1e-7`. ECE uses
//! equal-width bins over the max-class probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::argmax;

pub const NLL_CLAMP: f64 = 1e-7;
pub const ECE_BINS: usize = 10;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub brier: f64,
    pub nll: f64,
    pub ece: f64,
}

/// Pooled report over every `(sample, event)` pair plus one report per event.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub pooled: Metrics,
    pub per_event: Vec<Metrics>,
}

/// Multiclass metrics from probability rows and class indices.
pub fn metrics(probs: &[Vec<f64>], labels: &[usize]) -> Result<Metrics> {
    metrics_binned(probs, labels, ECE_BINS)
}

pub fn metrics_binned(probs: &[Vec<f64>], labels: &[usize], bins: usize) -> Result<Metrics> {
    if probs.len() != labels.len() {
        return Err(Error::dim("metrics", format!("{} probability rows vs {} labels", probs.len(), labels.len())));
    }
    if probs.is_empty() {
        return Err(Error::Data("metrics over zero samples".into()));
    }
    if bins == 0 {
        return Err(Error::Config("ECE needs at least one bin".into()));
    }
    let classes = probs[0].len();
    let mut correct = 0usize;
    let (mut brier, mut nll) = (0.0, 0.0);
    let mut bin_n = vec![0usize; bins];
    let mut bin_hit = vec![0usize; bins];
    let mut bin_conf = vec![0.0; bins];
    for (i, (p, &y)) in probs.iter().zip(labels).enumerate() {
        if p.len() != classes {
            return Err(Error::dim("metrics", format!("row {i} has {} classes, expected {classes}", p.len())));
        }
        if y >= classes {
            return Err(Error::Data(format!("label {y} at row {i} outside {classes} classes")));
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("row {i} has a probability outside [0, 1]")));
        }
        let pred = argmax(p);
        let hit = pred == y;
        correct += hit as usize;
        brier += p.iter().enumerate().map(|(c, &pc)| (pc - (c == y) as u8 as f64).powi(2)).sum::<f64>();
        nll -= p[y].max(NLL_CLAMP).ln();
        let conf = p[pred];
        let b = ((conf * bins as f64) as usize).min(bins - 1);
        bin_n[b] += 1;
        bin_hit[b] += hit as usize;
        bin_conf[b] += conf;
    }
    let n = probs.len() as f64;
    let ece = (0..bins)
        .filter(|&b| bin_n[b] > 0)
        .map(|b| {
            let nb = bin_n[b] as f64;
            (nb / n) * (bin_hit[b] as f64 / nb - bin_conf[b] / nb).abs()
        })
        .sum();
    Ok(Metrics { n: probs.len(), accuracy: correct as f64 / n, brier: brier / n, nll: nll / n, ece })
}

/// Per-event binary metrics from event probabilities `p̂[i][c]`, each scored
/// as the pair `(1 − p̂, p̂)` against class `y[i][c]`.
pub fn event_metrics(p_hat: &[Vec<f64>], labels: &[Vec<u8>]) -> Result<CalibrationReport> {
    if p_hat.len() != labels.len() {
        return Err(Error::dim("event_metrics", format!("{} rows vs {} label rows", p_hat.len(), labels.len())));
    }
    let events = p_hat.first().map_or(0, Vec::len);
    let mut pooled_p = Vec::with_capacity(p_hat.len() * events);
    let mut pooled_y = Vec::with_capacity(p_hat.len() * events);
    let mut per_p = vec![Vec::with_capacity(p_hat.len()); events];
    let mut per_y = vec![Vec::with_capacity(p_hat.len()); events];
    for (i, (ps, ys)) in p_hat.iter().zip(labels).enumerate() {
        if ps.len() != events || ys.len() != events {
            return Err(Error::dim("event_metrics", format!("row {i} is ragged")));
        }
        for c in 0..events {
            if ys[c] > 1 {
                return Err(Error::InvalidLabel { sample: i, event: c, value: ys[c] as f64 });
            }
            let pair = vec![1.0 - ps[c], ps[c]];
            pooled_p.push(pair.clone());
            pooled_y.push(ys[c] as usize);
            per_p[c].push(pair);
            per_y[c].push(ys[c] as usize);
        }
    }
    Ok(CalibrationReport {
        pooled: metrics(&pooled_p, &pooled_y)?,
        per_event: per_p.iter().zip(&per_y).map(|(p, y)| metrics(p, y)).collect::<Result<_>>()?,
    })
}

/// Fraction of `(sample, event)` decisions where `p̂ > 0.5` matches the label.
pub fn pooled_accuracy(p_hat: &[Vec<f64>], labels: &[Vec<u8>]) -> f64 {
    let mut total = 0usize;
    let mut hit = 0usize;
    for (ps, ys) in p_hat.iter().zip(labels) {
        for (&p, &y) in ps.iter().zip(ys) {
            total += 1;
            hit += ((p > 0.5) == (y == 1)) as usize;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Shannon entropy (nats) of a probability vector.
pub fn predictive_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}
