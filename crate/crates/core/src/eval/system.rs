//! One evaluation entry point for the cascade and every baseline.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{event_metrics, predictive_entropy, CalibrationReport};
use crate::error::{Error, Result};
use crate::model::CascadeModel;
use crate::runtime::{infer_with_exits, ExitPolicy, InferenceTrace, QuantizedModel, TraceSummary};
use crate::signal::FeatureSet;
use crate::train::{Baseline, BaselineKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Cascade,
    CascadeInt8,
    SoftmaxSingle,
    DeepEnsemble,
    InputAug,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cascade => "cascade",
            Self::CascadeInt8 => "cascade_int8",
            Self::SoftmaxSingle => "softmax_single",
            Self::DeepEnsemble => "deep_ensemble",
            Self::InputAug => "input_aug",
        }
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascade" => Ok(Self::Cascade),
            "cascade_int8" => Ok(Self::CascadeInt8),
            other => other.parse::<BaselineKind>().map(Self::from).map_err(|_| {
                Error::Config(format!(
                    "unknown system `{other}` (cascade|cascade_int8|softmax_single|deep_ensemble|input_aug)"
                ))
            }),
        }
    }
}

impl From<BaselineKind> for SystemKind {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::SoftmaxSingle => Self::SoftmaxSingle,
            BaselineKind::DeepEnsemble => Self::DeepEnsemble,
            BaselineKind::InputAug => Self::InputAug,
        }
    }
}

/// A trained system ready for evaluation.
#[derive(Clone, Debug)]
pub enum System {
    Cascade(CascadeModel<f32>),
    CascadeInt8(QuantizedModel),
    Baseline(Baseline),
}

impl System {
    pub fn kind(&self) -> SystemKind {
        match self {
            System::Cascade(_) => SystemKind::Cascade,
            System::CascadeInt8(_) => SystemKind::CascadeInt8,
            System::Baseline(b) => b.kind.into(),
        }
    }

    pub fn events(&self) -> usize {
        match self {
            System::Cascade(m) => m.config.events,
            System::CascadeInt8(m) => m.config.events,
            System::Baseline(b) => b.config().events,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system: SystemKind,
    pub n: usize,
    pub calibration: CalibrationReport,
    /// Mean per-sample uncertainty: mean `u_c` over events for the cascade,
    /// `1 − max` mean probability for softmax systems.
    pub mean_uncertainty: f64,
    /// Mean predictive entropy in nats (per-event Bernoulli entropy averaged
    /// over events for the cascade).
    pub mean_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exits: Option<TraceSummary>,
}

/// Report plus the per-sample values behind it.
#[derive(Clone, Debug)]
pub struct SystemEval {
    pub report: SystemReport,
    /// Event probability per sample and event.
    pub p_hat: Vec<Vec<f64>>,
    /// Uncertainty per sample and event (softmax systems repeat their
    /// sample-level proxy across events).
    pub uncertainty: Vec<Vec<f64>>,
    pub trace: Option<InferenceTrace>,
}

fn bernoulli_entropy(p: f64) -> f64 {
    predictive_entropy(&[p, 1.0 - p])
}

/// Evaluates `system` on `test`. The cascade follows `policy`; softmax
/// systems ignore it. Requesting a kind other than the system's own is an
/// error.
pub fn evaluate_system(
    kind: SystemKind,
    system: &System,
    test: &FeatureSet,
    policy: &ExitPolicy,
    jobs: usize,
) -> Result<SystemEval> {
    if system.kind() != kind {
        return Err(Error::KindMismatch { expected: kind.name().into(), found: system.kind().name().into() });
    }
    if test.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let events = system.events();
    if test.labels.iter().any(|y| y.len() != events) {
        return Err(Error::dim("evaluate", format!("labels do not have {events} events")));
    }
    let (p_hat, uncertainty, entropy, trace) = match system {
        System::Cascade(_) | System::CascadeInt8(_) => {
            let trace = match system {
                System::Cascade(m) => infer_with_exits(m, &test.inputs, policy, jobs, false)?,
                System::CascadeInt8(m) => infer_with_exits(m, &test.inputs, policy, jobs, false)?,
                System::Baseline(_) => unreachable!(),
            };
            let p: Vec<Vec<f64>> = trace.samples.iter().map(|s| s.p_hat()).collect();
            let u: Vec<Vec<f64>> = trace.samples.iter().map(|s| s.events.iter().map(|e| e.u).collect()).collect();
            let h: Vec<f64> =
                p.iter().map(|ps| ps.iter().map(|&q| bernoulli_entropy(q)).sum::<f64>() / ps.len() as f64).collect();
            (p, u, h, Some(trace))
        }
        System::Baseline(b) => {
            let mut p = Vec::with_capacity(test.len());
            let mut u = Vec::with_capacity(test.len());
            let mut h = Vec::with_capacity(test.len());
            for (i, x) in test.inputs.iter().enumerate() {
                let probs = b.predict(x, i)?;
                let proxy = 1.0 - probs.iter().copied().fold(0.0, f64::max);
                h.push(predictive_entropy(&probs));
                u.push(vec![proxy; events]);
                p.push(probs);
            }
            (p, u, h, None)
        }
    };
    let calibration = event_metrics(&p_hat, &test.labels)?;
    let n = test.len();
    let mean_uncertainty = uncertainty.iter().map(|u| u.iter().sum::<f64>() / u.len() as f64).sum::<f64>() / n as f64;
    let mean_entropy = entropy.iter().sum::<f64>() / n as f64;
    let report = SystemReport {
        system: kind,
        n,
        calibration,
        mean_uncertainty,
        mean_entropy,
        exits: trace.as_ref().map(InferenceTrace::summary),
    };
    Ok(SystemEval { report, p_hat, uncertainty, trace })
}
