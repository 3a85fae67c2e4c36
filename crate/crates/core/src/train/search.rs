//! Exhaustive `(channels, ops)` search scored by accuracy per unit of cost.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cascade::train_deep_exit;
use super::hyper::{split_validation, Hyper};
use crate::error::{Error, Result};
use crate::model::{build_model, count_macs, BackboneConfig, CascadeModel, Depth, CHANNEL_GRID, OPS_GRID};
use crate::signal::FeatureSet;

/// Cost that divides accuracy in the tradeoff score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDenominator {
    /// Deep-exit MACs relative to the cheapest candidate.
    #[default]
    Macs,
    /// Block count relative to the smallest candidate.
    Blocks,
}

impl FromStr for ScoreDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macs" => Ok(Self::Macs),
            "blocks" => Ok(Self::Blocks),
            other => Err(Error::Config(format!("unknown score denominator `{other}` (macs|blocks)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub channels: Vec<usize>,
    pub ops: Vec<usize>,
    /// Accept values outside the standard grids.
    pub off_grid: bool,
    pub denominator: ScoreDenominator,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            channels: CHANNEL_GRID.to_vec(),
            ops: OPS_GRID.to_vec(),
            off_grid: false,
            denominator: ScoreDenominator::Macs,
        }
    }
}

impl SearchSpace {
    pub fn new(channels: Vec<usize>, ops: Vec<usize>) -> Self {
        Self { channels, ops, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.ops.is_empty() {
            return Err(Error::Config("search space needs at least one channel width and one ops size".into()));
        }
        if !self.off_grid {
            if let Some(l) = self.channels.iter().find(|l| !CHANNEL_GRID.contains(l)) {
                return Err(Error::Config(format!("channel width {l} is not in the grid {CHANNEL_GRID:?}")));
            }
            if let Some(o) = self.ops.iter().find(|o| !OPS_GRID.contains(o)) {
                return Err(Error::Config(format!("ops size {o} is not in the grid {OPS_GRID:?}")));
            }
        }
        Ok(())
    }

    /// Candidates in grid order: channels outer, ops inner.
    pub fn candidates(&self, input_shape: [usize; 3], events: usize) -> Result<Vec<BackboneConfig>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.channels.len() * self.ops.len());
        for &l in &self.channels {
            for &o in &self.ops {
                let mut cfg = BackboneConfig::new(l, o, input_shape, events);
                cfg.off_grid = self.off_grid;
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub channels: usize,
    pub ops: usize,
    pub accuracy: f64,
    pub macs: u64,
    pub score: f64,
    pub status: CandidateStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: BackboneConfig,
    pub table: Vec<CandidateRow>,
    pub seed: u64,
}

impl SearchResult {
    pub fn best_row(&self) -> &CandidateRow {
        self.table
            .iter()
            .find(|r| r.channels == self.best.channels && r.ops == self.best.ops)
            .expect("winner is in the table")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.table {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io("search table", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads a table written by [`SearchResult::write_csv`].
pub fn read_table(path: &Path) -> Result<Vec<CandidateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Index of the highest score, earliest row on ties; `None` if every row failed.
pub fn argmax_score(table: &[CandidateRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, row) in table.iter().enumerate() {
        if row.status != CandidateStatus::Ok {
            continue;
        }
        if best.map_or(true, |b| row.score > table[b].score) {
            best = Some(i);
        }
    }
    best
}

/// Deep-exit training used to score one candidate. Returns the
/// best-validation-accuracy checkpoint and that accuracy.
pub fn train_candidate(
    cfg: &BackboneConfig,
    train: &FeatureSet,
    val: &FeatureSet,
    hyper: &Hyper,
) -> Result<(CascadeModel<f32>, f64)> {
    let mut model = build_model(cfg, hyper.seed)?;
    let report = train_deep_exit(&mut model, train, val, hyper)?;
    Ok((model, report.best_val_accuracy))
}

/// Scores every candidate with `evaluate` (which returns an accuracy) on up
/// to `jobs` threads; rows come back in grid order regardless of `jobs`.
/// A candidate whose evaluation errors is kept in the table with score 0.
pub fn search_with<F>(
    space: &SearchSpace,
    input_shape: [usize; 3],
    events: usize,
    seed: u64,
    jobs: usize,
    evaluate: F,
) -> Result<SearchResult>
where
    F: Fn(&BackboneConfig) -> Result<f64> + Sync,
{
    let candidates = space.candidates(input_shape, events)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let accuracies: Vec<Option<f64>> =
        pool.install(|| candidates.par_iter().map(|c| evaluate(c).ok().filter(|a| a.is_finite())).collect());

    let cost = |c: &BackboneConfig| match space.denominator {
        ScoreDenominator::Macs => count_macs(c, Depth::Deep) as f64,
        ScoreDenominator::Blocks => c.ops as f64,
    };
    let min_cost = candidates.iter().map(cost).fold(f64::INFINITY, f64::min);
    let table: Vec<CandidateRow> = candidates
        .iter()
        .zip(&accuracies)
        .map(|(c, acc)| {
            let (accuracy, score, status) = match acc {
                Some(a) => (*a, a / (cost(c) / min_cost), CandidateStatus::Ok),
                None => (0.0, 0.0, CandidateStatus::Failed),
            };
            CandidateRow { channels: c.channels, ops: c.ops, accuracy, macs: count_macs(c, Depth::Deep), score, status }
        })
        .collect();
    let best = argmax_score(&table).ok_or(Error::AllCandidatesFailed)?;
    Ok(SearchResult { best: candidates[best].clone(), table, seed })
}

/// Trains every candidate's deep exit on a stratified split of `data` and
/// returns the accuracy/cost winner.
pub fn search(space: &SearchSpace, data: &FeatureSet, hyper: &Hyper, jobs: usize) -> Result<SearchResult> {
    hyper.validate()?;
    let (train, val) = split_validation(data, hyper.val_fraction, hyper.seed)?;
    let shape = data.inputs[0].shape();
    let input_shape = [shape[0], shape[1], shape[2]];
    let events = data.labels[0].len();
    search_with(space, input_shape, events, hyper.seed, jobs, |cfg| {
        train_candidate(cfg, &train, &val, hyper).map(|(_, acc)| acc)
    })
}
