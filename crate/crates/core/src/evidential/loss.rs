//! Entropy-regularized evidential losses.
//!
//! One-vs-all Beta form, per event `c` and sample `i`:
//! `BCE(α/(α+β), y) − λ·H(Beta(α, β))`, averaged over samples and events.
//! The multiclass Dirichlet form replaces BCE with `CE(α/S, y)`.

use serde::{Deserialize, Serialize};

use super::entropy::{dirichlet_entropy, dirichlet_entropy_grad};
use super::evidence::BetaEvidence;
use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Entropy-regularizer weight.
    pub lambda: f64,
    /// λ ramps linearly from 0 over this many epochs; 0 disables the ramp.
    pub anneal_epochs: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 0.1, anneal_epochs: 10 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Effective λ at a zero-based epoch.
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        if self.anneal_epochs == 0 {
            self.lambda
        } else {
            self.lambda * (epoch as f64 / self.anneal_epochs as f64).min(1.0)
        }
    }
}

/// Loss of a single (α, β, y) term and its partial derivatives in α and β.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaTerm {
    pub loss: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

pub fn beta_term(ev: BetaEvidence, label: u8, lambda: f64) -> Result<BetaTerm> {
    let (a, b) = (ev.alpha, ev.beta);
    let s = a + b;
    let p_raw = a / s;
    let p = p_raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = match label {
        0 => 0.0,
        1 => 1.0,
        v => return Err(Error::InvalidLabel { sample: 0, event: 0, value: v as f64 }),
    };
    let bce = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let d_p = if p == p_raw { -y / p + (1.0 - y) / (1.0 - p) } else { 0.0 };
    let h = dirichlet_entropy(&[a, b])?;
    let dh = dirichlet_entropy_grad(&[a, b])?;
    Ok(BetaTerm {
        loss: bce - lambda * h,
        d_alpha: d_p * b / (s * s) - lambda * dh[0],
        d_beta: -d_p * a / (s * s) - lambda * dh[1],
    })
}

fn check_labels(labels: &[Vec<u8>], rows: usize, events: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::dim("edl_loss", format!("{} label rows for {rows} samples", labels.len())));
    }
    for (i, row) in labels.iter().enumerate() {
        if row.len() != events {
            return Err(Error::dim("edl_loss", format!("sample {i} has {} labels, expected {events}", row.len())));
        }
        if let Some((c, &v)) = row.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidLabel { sample: i, event: c, value: v as f64 });
        }
    }
    Ok(())
}

/// Mean Beta loss over `samples × events`.
pub fn edl_loss(evidence: &[Vec<BetaEvidence>], labels: &[Vec<u8>], lambda: f64) -> Result<f64> {
    let events = evidence.first().map_or(0, Vec::len);
    check_labels(labels, evidence.len(), events)?;
    if evidence.is_empty() || events == 0 {
        return Err(Error::Data("edl_loss over an empty batch".into()));
    }
    let mut total = 0.0;
    for (row, ys) in evidence.iter().zip(labels) {
        if row.len() != events {
            return Err(Error::dim("edl_loss", "ragged evidence rows"));
        }
        for (&ev, &y) in row.iter().zip(ys) {
            BetaEvidence::new(ev.alpha, ev.beta)?;
            total += beta_term(ev, y, lambda)?.loss;
        }
    }
    Ok(total / (evidence.len() * events) as f64)
}

/// Loss of one sample's head logits `[z_pos, z_neg]` per event, and the
/// gradient of `scale · loss_sum` with respect to those logits.
///
/// The caller picks `scale` (typically `1 / (batch · events)`) so that
/// accumulated gradients match the mean loss.
pub fn edl_loss_logits(logits: &[[f64; 2]], labels: &[u8], lambda: f64, scale: f64) -> Result<(f64, Vec<[f64; 2]>)> {
    if logits.len() != labels.len() {
        return Err(Error::dim("edl_loss", format!("{} heads vs {} labels", logits.len(), labels.len())));
    }
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (c, (z, &y)) in logits.iter().zip(labels).enumerate() {
        let ev = BetaEvidence::from_logits(z[0], z[1]);
        let t = beta_term(ev, y, lambda).map_err(|e| match e {
            Error::InvalidLabel { value, .. } => Error::InvalidLabel { sample: 0, event: c, value },
            other => other,
        })?;
        loss += t.loss;
        let gz0 = if z[0] > 0.0 { t.d_alpha * scale } else { 0.0 };
        let gz1 = if z[1] > 0.0 { t.d_beta * scale } else { 0.0 };
        grads.push([gz0, gz1]);
    }
    Ok((loss, grads))
}

/// Multiclass form: `CE(α/S, y) − λ·H(Dir(α))` for one sample with target
/// distribution `target` (one-hot for hard labels). Returns `(loss, ∂/∂α)`.
pub fn dirichlet_edl_term(alpha: &[f64], target: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if alpha.len() != target.len() {
        return Err(Error::dim("dirichlet_edl_loss", "alpha / target length mismatch"));
    }
    if let Some(&a) = alpha.iter().find(|a| !(**a >= 1.0)) {
        return Err(Error::InvalidEvidence(format!("alpha component {a} < 1")));
    }
    let s: f64 = alpha.iter().sum();
    let ysum: f64 = target.iter().sum();
    let ce = -alpha.iter().zip(target).map(|(&a, &y)| y * (a / s).ln()).sum::<f64>();
    let h = dirichlet_entropy(alpha)?;
    let dh = dirichlet_entropy_grad(alpha)?;
    let grad = alpha.iter().zip(target).zip(&dh).map(|((&a, &y), &g)| -y / a + ysum / s - lambda * g).collect();
    Ok((ce - lambda * h, grad))
}

/// Mean multiclass loss over samples.
pub fn dirichlet_edl_loss(alphas: &[Vec<f64>], targets: &[Vec<f64>], lambda: f64) -> Result<f64> {
    if alphas.len() != targets.len() || alphas.is_empty() {
        return Err(Error::dim("dirichlet_edl_loss", "sample count mismatch or empty batch"));
    }
    let mut total = 0.0;
    for (a, y) in alphas.iter().zip(targets) {
        total += dirichlet_edl_term(a, y, lambda)?.0;
    }
    Ok(total / alphas.len() as f64)
}
