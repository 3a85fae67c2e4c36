//! Threshold sweep: exit rates, mean MACs and quality per `tau`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::{evaluate_system, System};
use crate::error::{Error, Result};
use crate::runtime::{ExitPolicy, ExitRule};
use crate::signal::FeatureSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub tau: f64,
    pub exit_rate_shallow: f64,
    pub exit_rate_medium: f64,
    pub exit_rate_deep: f64,
    pub mean_macs: f64,
    pub accuracy: f64,
    pub nll: f64,
    pub mean_uncertainty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitProfile {
    pub rule: ExitRule,
    pub rows: Vec<ProfileRow>,
}

/// Parses `start:stop:step` (inclusive stop) or a comma list.
pub fn parse_tau_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad threshold grid `{spec}` (use start:stop:step or a,b,c)"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> =
            spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // rounded to 12 decimals so 0.1 steps print as 0.3, not 0.30000000000000004
        (0..=n).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config(format!("threshold grid `{spec}` must be nonempty and inside [0, 1]")));
    }
    Ok(grid)
}

/// Evaluates the cascade at every threshold (up to `jobs` in parallel),
/// rows in grid order.
pub fn exit_profile(
    system: &System,
    test: &FeatureSet,
    taus: &[f64],
    rule: ExitRule,
    jobs: usize,
) -> Result<ExitProfile> {
    let row = |&tau: &f64| -> Result<ProfileRow> {
        let policy = ExitPolicy::new(tau, rule)?;
        let ev = evaluate_system(system.kind(), system, test, &policy, 1)?;
        let exits =
            ev.report.exits.clone().ok_or_else(|| Error::Config("exit profile needs a cascade model".into()))?;
        Ok(ProfileRow {
            tau,
            exit_rate_shallow: exits.exit_rate[0],
            exit_rate_medium: exits.exit_rate[1],
            exit_rate_deep: exits.exit_rate[2],
            mean_macs: exits.mean_macs,
            accuracy: ev.report.calibration.pooled.accuracy,
            nll: ev.report.calibration.pooled.nll,
            mean_uncertainty: ev.report.mean_uncertainty,
        })
    };
    let rows = if jobs <= 1 {
        taus.iter().map(row).collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| taus.par_iter().map(row).collect::<Result<Vec<_>>>())?
    };
    Ok(ExitProfile { rule, rows })
}

impl ExitProfile {
    /// True when mean MACs never increase as `tau` grows.
    pub fn macs_monotone(&self) -> bool {
        let mut rows: Vec<&ProfileRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        rows.windows(2).all(|w| w[1].mean_macs <= w[0].mean_macs)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("profile", e))?;
        Ok(())
    }
}
