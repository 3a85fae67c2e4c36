//! Synthetic multi-event dataset: each event is a sinusoid burst at its own
//! frequency buried in white noise with a per-sample SNR.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample, Split};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub events: usize,
    pub n_per_event: usize,
    /// Inclusive SNR range in dB; `(inf, inf)` yields noiseless tones.
    pub snr_db: (f64, f64),
    pub seed: u64,
    pub sample_rate: f64,
    pub duration_s: f64,
    /// Event `c` sits at `base_freq + c * freq_step` Hz.
    pub base_freq: f64,
    pub freq_step: f64,
    /// Overall gain is drawn log-uniformly from `[1/gain_spread, gain_spread]`.
    pub gain_spread: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            events: 3,
            n_per_event: 200,
            snr_db: (-12.0, 12.0),
            seed: 0,
            sample_rate: 4000.0,
            duration_s: 1.0,
            base_freq: 300.0,
            freq_step: 300.0,
            gain_spread: 3.0,
        }
    }
}

impl SyntheticSpec {
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.events).map(|c| self.base_freq + c as f64 * self.freq_step).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.events < 2 {
            return Err(Error::Config(format!("synthetic data needs >= 2 events, got {}", self.events)));
        }
        let (lo, hi) = self.snr_db;
        if lo.is_nan() || hi.is_nan() || lo > hi || (lo.is_infinite() && lo < 0.0) {
            return Err(Error::Config(format!("invalid SNR range ({lo}, {hi})")));
        }
        if !(self.sample_rate > 0.0 && self.duration_s > 0.0 && self.gain_spread >= 1.0) {
            return Err(Error::Config("sample rate, duration must be positive and gain spread >= 1".into()));
        }
        let nyquist = self.sample_rate / 2.0;
        if let Some(f) = self.frequencies().into_iter().find(|&f| f <= 0.0 || f >= nyquist) {
            return Err(Error::Config(format!("event frequency {f} Hz not below Nyquist ({nyquist} Hz)")));
        }
        Ok(())
    }
}

/// Builds `events × n_per_event` training samples with one-hot labels, in a
/// seed-determined shuffled order.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = (spec.sample_rate * spec.duration_s).round() as usize;
    let freqs = spec.frequencies();
    let ramp = ((0.01 * spec.sample_rate) as usize).max(1);
    let mut samples = Vec::with_capacity(spec.events * spec.n_per_event);
    for (c, &f0) in freqs.iter().enumerate() {
        for _ in 0..spec.n_per_event {
            let snr = if spec.snr_db.0 == spec.snr_db.1 {
                spec.snr_db.0
            } else {
                rng.random_range(spec.snr_db.0..=spec.snr_db.1)
            };
            let freq = f0 * (1.0 + rng.random_range(-0.02..=0.02));
            let phase = rng.random_range(0.0..2.0 * PI);
            let burst = rng.random_range((0.6 * len as f64) as usize..=len);
            let start = rng.random_range(0..=len - burst);
            let gain = spec.gain_spread.powf(rng.random_range(-1.0..=1.0));
            // tone power during the burst is 1/2
            let sigma = if snr.is_infinite() { 0.0 } else { (0.5 / 10f64.powf(snr / 10.0)).sqrt() };
            let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
            let signal = (0..len)
                .map(|n| {
                    let tone = if (start..start + burst).contains(&n) {
                        let edge = (n - start).min(start + burst - 1 - n);
                        let env = if edge < ramp { 0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos() } else { 1.0 };
                        env * (2.0 * PI * freq * n as f64 / spec.sample_rate + phase).sin()
                    } else {
                        0.0
                    };
                    let eps = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (gain * (tone + eps)) as f32
                })
                .collect();
            let mut labels = vec![0u8; spec.events];
            labels[c] = 1;
            samples.push(Sample { signal, labels, split: Split::Train });
        }
    }
    samples.shuffle(&mut rng);
    Ok(Dataset {
        name: format!("synthetic-{}ev-seed{}", spec.events, spec.seed),
        sample_rate: spec.sample_rate,
        events: freqs.iter().map(|f| format!("tone_{f:.0}hz")).collect(),
        samples,
    })
}
