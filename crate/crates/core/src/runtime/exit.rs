//! Uncertainty-thresholded early exits.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quant::QuantizedModel;
use crate::error::{Error, Result};
use crate::model::{count_macs, BackboneConfig, CascadeModel, Depth, StageOutput};
use crate::numerics::Tensor;

/// How per-event uncertainties combine into an exit decision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitRule {
    /// Exit when every event is confident: `max_c u_c <= tau`.
    #[default]
    AllHeads,
    /// Exit when any event is confident: `min_c u_c <= tau`.
    AnyHead,
    /// Each event finalizes at its first stage with `u_c <= tau`; the sample
    /// runs as deep as its slowest event.
    PerHead,
}

impl ExitRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::AllHeads => "all_heads",
            Self::AnyHead => "any_head",
            Self::PerHead => "per_head",
        }
    }
}

impl FromStr for ExitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_heads" => Ok(Self::AllHeads),
            "any_head" => Ok(Self::AnyHead),
            "per_head" => Ok(Self::PerHead),
            other => Err(Error::Config(format!("unknown exit rule `{other}` (all_heads|any_head|per_head)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitPolicy {
    pub tau: f64,
    pub rule: ExitRule,
}

impl Default for ExitPolicy {
    fn default() -> Self {
        Self { tau: 0.0, rule: ExitRule::AllHeads }
    }
}

impl ExitPolicy {
    pub fn new(tau: f64, rule: ExitRule) -> Result<Self> {
        let p = Self { tau, rule };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.tau)));
        }
        Ok(())
    }

    /// Whole-sample exit predicate for `AllHeads` / `AnyHead`.
    pub fn holds(&self, u: &[f64]) -> bool {
        match self.rule {
            ExitRule::AllHeads | ExitRule::PerHead => u.iter().all(|&v| v <= self.tau),
            ExitRule::AnyHead => u.iter().any(|&v| v <= self.tau),
        }
    }
}

/// A network evaluated one cascade stage at a time.
pub trait StagedModel {
    fn config(&self) -> &BackboneConfig;
    fn check_input(&self, x: &Tensor<f32>) -> Result<()>;
    fn stage(&self, stage: usize, input: &Tensor<f32>) -> Result<StageOutput<f32>>;
    fn weights_finite(&self) -> bool;
}

impl StagedModel for CascadeModel<f32> {
    fn config(&self) -> &BackboneConfig {
        &self.config
    }

    fn check_input(&self, x: &Tensor<f32>) -> Result<()> {
        CascadeModel::check_input(self, x)
    }

    fn stage(&self, stage: usize, input: &Tensor<f32>) -> Result<StageOutput<f32>> {
        self.stage_forward(stage, input)
    }

    fn weights_finite(&self) -> bool {
        self.is_finite()
    }
}

impl StagedModel for QuantizedModel {
    fn config(&self) -> &BackboneConfig {
        &self.config
    }

    fn check_input(&self, x: &Tensor<f32>) -> Result<()> {
        self.dequantized().check_input(x)
    }

    fn stage(&self, stage: usize, input: &Tensor<f32>) -> Result<StageOutput<f32>> {
        self.stage_forward(stage, input)
    }

    fn weights_finite(&self) -> bool {
        self.dequantized().is_finite()
    }
}

/// Final answer for one event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub y: u8,
    pub u: f64,
    pub p: f64,
    /// Stage that produced this answer.
    pub stage: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub sample_id: usize,
    pub exit_stage: usize,
    pub events: Vec<EventOutcome>,
    pub macs: u64,
    /// Raw `(z1, z2)` per stage run and event, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_logits: Option<Vec<Vec<[f32; 2]>>>,
}

impl SampleTrace {
    pub fn p_hat(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.p).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub policy: ExitPolicy,
    pub samples: Vec<SampleTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub n: usize,
    pub tau: f64,
    pub rule: ExitRule,
    pub exit_counts: [usize; 3],
    pub exit_rate: [f64; 3],
    pub mean_macs: f64,
}

impl InferenceTrace {
    pub fn summary(&self) -> TraceSummary {
        let mut counts = [0usize; 3];
        let mut macs = 0u64;
        for s in &self.samples {
            counts[s.exit_stage] += 1;
            macs += s.macs;
        }
        let n = self.samples.len();
        let denom = n.max(1) as f64;
        TraceSummary {
            n,
            tau: self.policy.tau,
            rule: self.policy.rule,
            exit_counts: counts,
            exit_rate: counts.map(|c| c as f64 / denom),
            mean_macs: macs as f64 / denom,
        }
    }

    /// `sample_id, exit_stage, y_c, u_c, p_c for each event, macs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let events = self.samples.first().map_or(0, |s| s.events.len());
        let mut header = vec!["sample_id".to_string(), "exit_stage".to_string()];
        for c in 0..events {
            header.extend([format!("y_{c}"), format!("u_{c}"), format!("p_{c}")]);
        }
        header.push("macs".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![s.sample_id.to_string(), s.exit_stage.to_string()];
            for e in &s.events {
                rec.extend([e.y.to_string(), e.u.to_string(), e.p.to_string()]);
            }
            rec.push(s.macs.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

fn outcome(out: &StageOutput<f32>, c: usize) -> EventOutcome {
    let ev = out.evidence[c];
    EventOutcome { y: ev.is_positive() as u8, u: ev.uncertainty(), p: ev.prob(), stage: out.stage }
}

/// Runs one sample through the stages until `policy` lets it exit.
pub fn infer_sample<M: StagedModel + ?Sized>(
    model: &M,
    x: &Tensor<f32>,
    policy: &ExitPolicy,
    sample_id: usize,
    keep_logits: bool,
) -> Result<SampleTrace> {
    model.check_input(x)?;
    let events = model.config().events;
    let mut final_events: Vec<Option<EventOutcome>> = vec![None; events];
    let mut logits = Vec::new();
    let mut h = x.clone();
    let mut exit_stage = 2;
    for s in 0..3 {
        let out = model.stage(s, &h)?;
        if out.logits.iter().flatten().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteWeights(format!("stage {s} produced non-finite logits")));
        }
        if keep_logits {
            logits.push(out.logits.clone());
        }
        let u: Vec<f64> = out.evidence.iter().map(|e| e.uncertainty()).collect();
        let done = match policy.rule {
            ExitRule::PerHead => {
                for c in 0..events {
                    if final_events[c].is_none() && (u[c] <= policy.tau || s == 2) {
                        final_events[c] = Some(outcome(&out, c));
                    }
                }
                final_events.iter().all(Option::is_some)
            }
            _ => {
                if policy.holds(&u) || s == 2 {
                    for (c, slot) in final_events.iter_mut().enumerate() {
                        *slot = Some(outcome(&out, c));
                    }
                    true
                } else {
                    false
                }
            }
        };
        if done {
            exit_stage = s;
            break;
        }
        h = out.features;
    }
    let depth = Depth::from_index(exit_stage).expect("stage index below 3");
    Ok(SampleTrace {
        sample_id,
        exit_stage,
        events: final_events.into_iter().map(|e| e.expect("every event finalized")).collect(),
        macs: count_macs(model.config(), depth),
        stage_logits: keep_logits.then_some(logits),
    })
}

/// Early-exit inference over a batch on up to `jobs` threads; the trace
/// keeps input order.
pub fn infer_with_exits<M: StagedModel + Sync + ?Sized>(
    model: &M,
    inputs: &[Tensor<f32>],
    policy: &ExitPolicy,
    jobs: usize,
    keep_logits: bool,
) -> Result<InferenceTrace> {
    policy.validate()?;
    if !model.weights_finite() {
        return Err(Error::NonFiniteWeights("model".into()));
    }
    let run = || {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, x)| infer_sample(model, x, policy, i, keep_logits))
            .collect::<Result<Vec<_>>>()
    };
    let samples = if jobs <= 1 {
        inputs
            .iter()
            .enumerate()
            .map(|(i, x)| infer_sample(model, x, policy, i, keep_logits))
            .collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?
    };
    Ok(InferenceTrace { policy: *policy, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::BetaEvidence;
    use crate::numerics::Tensor;

    /// Stage outputs with fixed per-stage uncertainties.
    struct Fixed {
        cfg: BackboneConfig,
        u: [[f64; 2]; 3],
    }

    impl StagedModel for Fixed {
        fn config(&self) -> &BackboneConfig {
            &self.cfg
        }
        fn check_input(&self, _: &Tensor<f32>) -> Result<()> {
            Ok(())
        }
        fn stage(&self, stage: usize, input: &Tensor<f32>) -> Result<StageOutput<f32>> {
            // u = 2 / (z + 2) with z1 = z, z2 = 0
            let logits: Vec<[f32; 2]> = self.u[stage].iter().map(|&u| [(2.0 / u - 2.0) as f32, 0.0]).collect();
            let evidence = logits.iter().map(|z| BetaEvidence::from_logits(z[0] as f64, z[1] as f64)).collect();
            Ok(StageOutput { stage, features: input.clone(), logits, evidence })
        }
        fn weights_finite(&self) -> bool {
            true
        }
    }

    fn fixed() -> Fixed {
        Fixed { cfg: BackboneConfig::new(8, 3, [1, 4, 4], 2).off_grid(), u: [[0.03, 0.2], [0.05, 0.08], [0.5, 0.5]] }
    }

    fn run(rule: ExitRule, tau: f64) -> SampleTrace {
        infer_sample(&fixed(), &Tensor::zeros(&[1, 4, 4]), &ExitPolicy::new(tau, rule).unwrap(), 0, true).unwrap()
    }

    #[test]
    fn rules_differ_on_mixed_uncertainty() {
        assert_eq!(run(ExitRule::AllHeads, 0.1).exit_stage, 1);
        assert_eq!(run(ExitRule::AnyHead, 0.1).exit_stage, 0);
        let per = run(ExitRule::PerHead, 0.1);
        assert_eq!(per.exit_stage, 1);
        assert_eq!(per.events[0].stage, 0);
        assert_eq!(per.events[1].stage, 1);
        assert_eq!(per.macs, count_macs(&fixed().cfg, Depth::Medium));
    }

    #[test]
    fn extreme_thresholds() {
        for rule in [ExitRule::AllHeads, ExitRule::AnyHead, ExitRule::PerHead] {
            assert_eq!(run(rule, 1.0).exit_stage, 0);
            assert_eq!(run(rule, 0.0).exit_stage, 2);
        }
        assert!(ExitPolicy::new(1.5, ExitRule::AllHeads).is_err());
    }

    #[test]
    fn parallel_trace_matches_serial() {
        let m = CascadeModel::build(&BackboneConfig::new(8, 3, [1, 4, 5], 2).off_grid(), 0).unwrap();
        let xs: Vec<Tensor<f32>> = (0..12)
            .map(|s| {
                Tensor::from_vec(&[1, 4, 5], (0..20).map(|i| ((i * 7 + s) as f32 * 0.13).cos()).collect()).unwrap()
            })
            .collect();
        let p = ExitPolicy::new(0.6, ExitRule::AllHeads).unwrap();
        let a = infer_with_exits(&m, &xs, &p, 1, false).unwrap();
        let b = infer_with_exits(&m, &xs, &p, 3, false).unwrap();
        assert_eq!(a, b);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("sample_id,exit_stage,y_0,u_0,p_0,y_1,u_1,p_1,macs"));
    }
}
