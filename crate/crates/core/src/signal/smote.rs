//! SMOTE oversampling of one event's positive training samples.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, Sample, Split};
use crate::error::{Error, Result};

/// `base + u·(neighbor − base)`.
pub fn interpolate(base: &[f32], neighbor: &[f32], u: f64) -> Vec<f32> {
    base.iter().zip(neighbor).map(|(&b, &n)| (b as f64 + u * (n as f64 - b as f64)) as f32).collect()
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
}

/// Adds synthetic training positives for `event` until the training split
/// holds `target_count` of them.
///
/// Each synthetic sample interpolates a random positive towards one of its
/// `k` nearest positive neighbours (`k` is capped at `positives − 1`). Its
/// label vector marks only `event`. Already-sufficient events are returned
/// unchanged.
pub fn smote_upsample(dataset: &Dataset, event: usize, target_count: usize, k: usize, seed: u64) -> Result<Dataset> {
    if event >= dataset.num_events() {
        return Err(Error::Config(format!("event index {event} out of range")));
    }
    if k == 0 {
        return Err(Error::Config("SMOTE needs k >= 1".into()));
    }
    let positives: Vec<&Sample> = dataset.split(Split::Train).filter(|s| s.labels[event] == 1).collect();
    if positives.len() < 2 {
        return Err(Error::Data(format!(
            "event `{}` has {} training positive(s); SMOTE needs at least 2",
            dataset.events[event],
            positives.len()
        )));
    }
    let mut out = dataset.clone();
    if positives.len() >= target_count {
        return Ok(out);
    }
    let k = k.min(positives.len() - 1);
    let neighbors: Vec<Vec<usize>> = (0..positives.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..positives.len())
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&positives[i].signal, &positives[j].signal), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0u8; dataset.num_events()];
    labels[event] = 1;
    for _ in positives.len()..target_count {
        let i = rng.random_range(0..positives.len());
        let j = neighbors[i][rng.random_range(0..k)];
        let u: f64 = rng.random();
        out.samples.push(Sample {
            signal: interpolate(&positives[i].signal, &positives[j].signal, u),
            labels: labels.clone(),
            split: Split::Train,
        });
    }
    Ok(out)
}
