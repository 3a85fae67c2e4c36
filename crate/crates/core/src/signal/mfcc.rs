//! MFCC feature extraction.
//!
//! Per frame: Hamming window → FFT magnitude → triangular mel filterbank
//! (HTK mel scale) → `ln(x + 1e-10)` → orthonormal DCT-II, first `n_mfcc`
//! coefficients. Frames are taken without centering or padding, so
//! `frames = floor((len − frame) / hop) + 1`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

const LOG_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: f64,
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub n_mfcc: usize,
}

impl FeatureConfig {
    /// 80 ms frames, 40 ms hop, 10 coefficients.
    pub fn for_rate(sample_rate: f64) -> Self {
        Self { sample_rate, frame_len_ms: 80.0, hop_ms: 40.0, n_mels: 20, n_mfcc: 10 }
    }

    pub fn frame_samples(&self) -> usize {
        (self.sample_rate * self.frame_len_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.sample_rate * self.hop_ms / 1000.0).round() as usize
    }

    /// Next power of two ≥ the frame length.
    pub fn n_fft(&self) -> usize {
        self.frame_samples().next_power_of_two()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sample_rate > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate));
        }
        if self.frame_samples() < 2 || self.hop_samples() == 0 {
            return bad("frame must span >= 2 samples and hop >= 1 sample".into());
        }
        if self.hop_samples() > self.frame_samples() {
            return bad(format!("hop {} ms exceeds frame {} ms", self.hop_ms, self.frame_len_ms));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!("need 0 < n_mfcc ({}) <= n_mels ({})", self.n_mfcc, self.n_mels));
        }
        Ok(())
    }

    pub fn frames(&self, signal_len: usize) -> Result<usize> {
        let f = self.frame_samples();
        if signal_len < f {
            return Err(Error::Data(format!("signal of {signal_len} samples shorter than one frame ({f})")));
        }
        Ok((signal_len - f) / self.hop_samples() + 1)
    }

    /// Feature tensor shape `[1, n_mfcc, frames]` for a signal length.
    pub fn output_shape(&self, signal_len: usize) -> Result<[usize; 3]> {
        Ok([1, self.n_mfcc, self.frames(signal_len)?])
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Magnitudes `|X_k|` of the length-`n` DFT (`n` a power of two).
pub fn fft_magnitude(signal: &[f64]) -> Result<Vec<f64>> {
    let n = signal.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Config(format!("FFT length {n} is not a power of two")));
    }
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf.iter().map(|c| c.norm()).collect())
}

/// `n_mels × (n_fft/2 + 1)` triangular filters spaced evenly on the mel scale
/// between 0 Hz and Nyquist.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: f64) -> Result<Vec<Vec<f64>>> {
    let bins = n_fft / 2 + 1;
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = |k: usize| k as f64 * sample_rate / n_fft as f64;
    let mut bank = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = (0..bins)
            .map(|k| {
                let f = bin_hz(k);
                if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                }
            })
            .collect();
        if row.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!("mel filter {m} covers no FFT bin; use fewer mels or a longer frame")));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Orthonormal DCT-II matrix, `rows × n`.
pub fn dct_matrix(rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n).map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()).collect()
        })
        .collect()
}

/// Precomputed window, filterbank and DCT for a [`FeatureConfig`].
pub struct MfccExtractor {
    config: FeatureConfig,
    window: Vec<f64>,
    bank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(config: &FeatureConfig) -> Result<Self> {
        config.validate()?;
        let n_fft = config.n_fft();
        Ok(Self {
            config: config.clone(),
            window: hamming(config.frame_samples()),
            bank: mel_filterbank(config.n_mels, n_fft, config.sample_rate)?,
            dct: dct_matrix(config.n_mfcc, config.n_mels),
            fft: FftPlanner::new().plan_fft_forward(n_fft),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn extract(&self, signal: &[f32]) -> Result<Tensor<f32>> {
        let frames = self.config.frames(signal.len())?;
        let (flen, hop, n_fft) = (self.config.frame_samples(), self.config.hop_samples(), self.config.n_fft());
        let n_mfcc = self.config.n_mfcc;
        let mut out = vec![0f32; n_mfcc * frames];
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut mel = vec![0.0; self.config.n_mels];
        for t in 0..frames {
            let frame = &signal[t * hop..t * hop + flen];
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot =
                    if i < flen { Complex::new(frame[i] as f64 * self.window[i], 0.0) } else { Complex::new(0.0, 0.0) };
            }
            self.fft.process(&mut buf);
            for (m, row) in self.bank.iter().enumerate() {
                let e: f64 = row.iter().zip(&buf).map(|(w, c)| w * c.norm()).sum();
                mel[m] = (e + LOG_FLOOR).ln();
            }
            for (k, basis) in self.dct.iter().enumerate() {
                out[k * frames + t] = basis.iter().zip(&mel).map(|(a, b)| a * b).sum::<f64>() as f32;
            }
        }
        Tensor::from_vec(&[1, n_mfcc, frames], out)
    }
}

pub fn extract_mfcc(signal: &[f32], config: &FeatureConfig) -> Result<Tensor<f32>> {
    MfccExtractor::new(config)?.extract(signal)
}
