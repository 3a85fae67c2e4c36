use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "param", rename_all = "snake_case")]
pub enum Corruption {
    /// Zeroes a contiguous random window covering this fraction of the signal.
    ZeroMask(f64),
    /// Adds i.i.d. `N(0, σ²)` noise.
    Gaussian(f64),
}

impl Corruption {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Corruption::ZeroMask(f) if !(0.0..=1.0).contains(&f) => {
                Err(Error::Config(format!("zero-mask fraction {f} outside [0, 1]")))
            }
            Corruption::Gaussian(s) if !(s >= 0.0) || !s.is_finite() => {
                Err(Error::Config(format!("noise sigma {s} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(*self, Corruption::ZeroMask(f) | Corruption::Gaussian(f) if f == 0.0)
    }
}

pub fn corrupt(signal: &[f32], corruption: Corruption, seed: u64) -> Result<Vec<f32>> {
    corruption.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = signal.to_vec();
    match corruption {
        Corruption::ZeroMask(fraction) => {
            let n = ((signal.len() as f64) * fraction).round() as usize;
            let start = rng.random_range(0..=signal.len() - n);
            out[start..start + n].iter_mut().for_each(|v| *v = 0.0);
        }
        Corruption::Gaussian(sigma) => {
            if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).expect("validated sigma");
                for v in &mut out {
                    *v = (*v as f64 + noise.sample(&mut rng)) as f32;
                }
            }
        }
    }
    Ok(out)
}

pub fn rms(signal: &[f32]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    (signal.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / signal.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Vec<f32> {
        (0..1000).map(|i| i as f32 * 0.01 + 1.0).collect()
    }

    #[test]
    fn full_mask_zeroes_everything() {
        assert!(corrupt(&ramp(), Corruption::ZeroMask(1.0), 3).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn partial_mask_is_one_contiguous_window() {
        let out = corrupt(&ramp(), Corruption::ZeroMask(0.25), 9).unwrap();
        let zeros: Vec<usize> = out.iter().enumerate().filter(|(_, &v)| v == 0.0).map(|(i, _)| i).collect();
        assert_eq!(zeros.len(), 250);
        assert_eq!(zeros.last().unwrap() - zeros[0], 249);
    }

    #[test]
    fn zero_sigma_is_identity() {
        assert_eq!(corrupt(&ramp(), Corruption::Gaussian(0.0), 1).unwrap(), ramp());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(corrupt(&ramp(), Corruption::ZeroMask(1.5), 1).is_err());
        assert!(corrupt(&ramp(), Corruption::ZeroMask(-0.1), 1).is_err());
        assert!(corrupt(&ramp(), Corruption::Gaussian(-1.0), 1).is_err());
    }

    #[test]
    fn jitter_mean_abs_matches_half_normal() {
        // E|N(0, σ²)| = σ·sqrt(2/π)
        let sigma = 0.03;
        let x = vec![0f32; 10_000];
        let out = corrupt(&x, Corruption::Gaussian(sigma), 42).unwrap();
        let mean_abs = out.iter().map(|&v| (v as f64).abs()).sum::<f64>() / out.len() as f64;
        let expect = sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_abs - expect).abs() / expect < 0.10, "{mean_abs} vs {expect}");
    }
}
