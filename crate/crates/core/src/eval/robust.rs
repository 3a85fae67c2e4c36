//! Accuracy and uncertainty under signal-domain corruption.

use serde::{Deserialize, Serialize};

use super::system::{evaluate_system, System};
use crate::error::{Error, Result};
use crate::runtime::ExitPolicy;
use crate::signal::{corrupt, rms, Corruption, MfccExtractor, Preprocess, Sample};
use crate::train::hyper::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessLevel {
    pub corruption: Corruption,
    pub n: usize,
    /// Pooled accuracy over `(sample, event)` decisions.
    pub accuracy: f64,
    pub nll: f64,
    pub mean_uncertainty: f64,
    /// Mean uncertainty over correct and incorrect event decisions.
    pub mean_u_correct: Option<f64>,
    pub mean_u_incorrect: Option<f64>,
    pub incorrect: usize,
    /// Event decisions that differ from the clean level.
    pub flips: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub levels: Vec<RobustnessLevel>,
}

/// Applies one corruption to every sample's raw signal. Gaussian noise is
/// scaled per sample: `Gaussian(k)` adds noise with `σ = k · rms(signal)`.
/// Sample `i` at level `l` draws from stream `(seed, l, i)`.
pub fn corrupt_samples(samples: &[Sample], corruption: Corruption, level: usize, seed: u64) -> Result<Vec<Sample>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let c = match corruption {
                Corruption::Gaussian(k) => Corruption::Gaussian(k * rms(&s.signal)),
                other => other,
            };
            let signal = corrupt(&s.signal, c, mix_seed(seed, level as u64, i as u64))?;
            Ok(Sample { signal, ..s.clone() })
        })
        .collect()
}

/// Evaluates `system` at every corruption level. The clean level is
/// inserted first when the grid does not start with it.
pub fn robustness_eval(
    system: &System,
    preprocess: &Preprocess,
    samples: &[Sample],
    grid: &[Corruption],
    policy: &ExitPolicy,
    seed: u64,
    jobs: usize,
) -> Result<RobustnessReport> {
    if samples.is_empty() {
        return Err(Error::Data("robustness evaluation needs samples".into()));
    }
    let mut levels: Vec<Corruption> = grid.to_vec();
    if levels.first().map_or(true, |c| !c.is_identity()) {
        levels.insert(0, Corruption::Gaussian(0.0));
    }
    let extractor = MfccExtractor::new(&preprocess.features)?;
    let mut clean_decisions: Vec<bool> = Vec::new();
    let mut out = Vec::with_capacity(levels.len());
    for (l, &corruption) in levels.iter().enumerate() {
        corruption.validate()?;
        let corrupted =
            if corruption.is_identity() { samples.to_vec() } else { corrupt_samples(samples, corruption, l, seed)? };
        let inputs =
            corrupted.iter().map(|s| preprocess.prepare_signal(&extractor, &s.signal)).collect::<Result<Vec<_>>>()?;
        let labels: Vec<Vec<u8>> = corrupted.iter().map(|s| s.labels.clone()).collect();
        let set = crate::signal::FeatureSet { inputs, labels };
        let ev = evaluate_system(system.kind(), system, &set, policy, jobs)?;
        let mut decisions = Vec::new();
        let (mut u_ok, mut n_ok, mut u_bad, mut n_bad) = (0.0, 0usize, 0.0, 0usize);
        for ((ps, us), ys) in ev.p_hat.iter().zip(&ev.uncertainty).zip(&set.labels) {
            for ((&p, &u), &y) in ps.iter().zip(us).zip(ys) {
                let positive = p > 0.5;
                decisions.push(positive);
                if positive == (y == 1) {
                    u_ok += u;
                    n_ok += 1;
                } else {
                    u_bad += u;
                    n_bad += 1;
                }
            }
        }
        if l == 0 {
            clean_decisions = decisions.clone();
        }
        let flips = decisions.iter().zip(&clean_decisions).filter(|(a, b)| a != b).count();
        out.push(RobustnessLevel {
            corruption,
            n: set.len(),
            accuracy: ev.report.calibration.pooled.accuracy,
            nll: ev.report.calibration.pooled.nll,
            mean_uncertainty: ev.report.mean_uncertainty,
            mean_u_correct: (n_ok > 0).then(|| u_ok / n_ok as f64),
            mean_u_incorrect: (n_bad > 0).then(|| u_bad / n_bad as f64),
            incorrect: n_bad,
            flips,
        });
    }
    Ok(RobustnessReport { levels: out })
}
