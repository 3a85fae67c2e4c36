//! Flag definitions and the resolved configuration of every subcommand.
//!
//! Each subcommand has a flag struct (every value optional, so unset flags
//! fall through to the config file) and a resolved struct holding the
//! defaults. Config-file keys are the resolved field names.

use std::path::PathBuf;

use cascade_edl::model::{CHANNEL_GRID, OPS_GRID};
use cascade_edl::runtime::ExitRule;
use cascade_edl::signal::Split;
use cascade_edl::train::ScoreDenominator;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "cascade-edl",
    version,
    about = "Evidential early-exit cascades for multi-event detection",
    long_about = "Evidential early-exit cascades for multi-event detection.\n\n\
        Every command writes its outputs and a `<command>.resolved.toml` snapshot into the output \
        directory. Values come from defaults, then the `[<command>]` table of --config, then the \
        CASCADE_EDL_OUT_DIR environment variable (output directory only), then flags.\n\n\
        Exit codes: 0 ok, 1 internal, 2 usage, 3 config, 4 data, 5 model file, 6 model/data mismatch, \
        7 i/o, 8 training failure. Errors print one line: `error[<kind>]: <message>`."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic multi-event dataset (manifest plus CSV splits)
    GenData(GenDataFlags),
    /// Grid-search channel width and block count by accuracy per normalized cost
    Search(SearchFlags),
    /// Train a cascade or a softmax baseline
    Train(TrainFlags),
    /// Evaluate a trained system on a dataset split
    Eval(EvalFlags),
    /// Run thresholded early-exit inference and write the per-sample trace
    Infer(InferFlags),
    /// Post-training int8 quantization with an accuracy-drop report
    Quantize(QuantizeFlags),
    /// Sweep the exit threshold and tabulate exit rates, cost and quality
    Profile(ProfileFlags),
    /// Evaluate under zero-masking and Gaussian noise corruption
    Robustness(RobustnessFlags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Search(_) => "search",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Infer(_) => "infer",
            Command::Quantize(_) => "quantize",
            Command::Profile(_) => "profile",
            Command::Robustness(_) => "robustness",
        }
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct Common {
    /// TOML file whose `[<command>]` table supplies values for this run
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Flags shared by commands that train.
#[derive(Args, Serialize, Debug, Clone)]
pub struct HyperFlags {
    /// Maximum epochs per training run (per phase for cascades) [default: 30]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Early-stopping patience in epochs [default: 5]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Stratified validation share of the training split [default: 0.1]
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Entropy-regularizer weight of the evidential loss [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Epochs over which the regularizer weight ramps up from 0 [default: 10]
    #[arg(long)]
    pub anneal_epochs: Option<usize>,
}

// ------------------------------------------------------------- gen-data

#[derive(Args, Serialize, Debug, Clone)]
pub struct GenDataFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Number of events C [default: 3]
    #[arg(long)]
    pub events: Option<usize>,
    /// Samples per event [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lowest per-sample SNR in dB [default: -12]
    #[arg(long, allow_hyphen_values = true)]
    pub snr_min: Option<f64>,
    /// Highest per-sample SNR in dB [default: 12]
    #[arg(long, allow_hyphen_values = true)]
    pub snr_max: Option<f64>,
    /// Sample rate in Hz [default: 4000]
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Signal duration in seconds [default: 1]
    #[arg(long)]
    pub duration: Option<f64>,
    /// Stratified share of samples assigned to the test split [default: 0.25]
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub out_dir: PathBuf,
    pub events: usize,
    pub n: usize,
    pub seed: u64,
    pub snr_min: f64,
    pub snr_max: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub test_fraction: f64,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            events: 3,
            n: 200,
            seed: 0,
            snr_min: -12.0,
            snr_max: 12.0,
            sample_rate: 4000.0,
            duration: 1.0,
            test_fraction: 0.25,
        }
    }
}

// ------------------------------------------------------------- search

#[derive(Args, Serialize, Debug, Clone)]
pub struct SearchFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dataset directory (its train split is searched)
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Channel widths to try, comma separated [default: the full width grid]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub channels: Option<Vec<usize>>,
    /// Block counts to try, comma separated [default: 3,4,5,6,7]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ops: Option<Vec<usize>>,
    /// Accept widths and block counts outside the standard grids
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub override_grid: bool,
    /// Cost that divides accuracy in the score: macs or blocks [default: macs]
    #[arg(long)]
    pub denominator: Option<ScoreDenominator>,
    /// Training seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for candidates [default: 1]
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub channels: Vec<usize>,
    pub ops: Vec<usize>,
    pub override_grid: bool,
    pub denominator: ScoreDenominator,
    pub seed: u64,
    pub jobs: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub lambda: f64,
    pub anneal_epochs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            data: None,
            channels: CHANNEL_GRID.to_vec(),
            ops: OPS_GRID.to_vec(),
            override_grid: false,
            denominator: ScoreDenominator::Macs,
            seed: 0,
            jobs: 1,
            epochs: 30,
            lr: 1e-3,
            batch_size: 32,
            patience: 5,
            val_fraction: 0.1,
            lambda: 0.1,
            anneal_epochs: 10,
        }
    }
}

// ------------------------------------------------------------- train

#[derive(Args, Serialize, Debug, Clone)]
pub struct TrainFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dataset directory (its train split is used)
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// cascade, softmax_single, deep_ensemble or input_aug [default: cascade]
    #[arg(long)]
    pub system: Option<String>,
    /// Channel width L [default: 32]
    #[arg(long)]
    pub channels: Option<usize>,
    /// Block count O [default: 3]
    #[arg(long)]
    pub ops: Option<usize>,
    /// Take channels and ops from a search's best_config.json
    #[arg(long, value_name = "FILE")]
    pub arch: Option<PathBuf>,
    /// Accept a width or block count outside the standard grids
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub override_grid: bool,
    /// Training seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train all stages up to the current one in every cascade phase
    #[arg(long)]
    #[serde(skip)]
    pub no_freeze: bool,
    /// Keep each phase's heads as initialized instead of restarting them at the label prior
    #[arg(long)]
    #[serde(skip)]
    pub no_prior_heads: bool,
    /// Jittered copies per sample for input_aug [default: 5]
    #[arg(long)]
    pub aug_copies: Option<usize>,
    /// Jitter standard deviation for input_aug [default: 0.03]
    #[arg(long)]
    pub aug_sigma: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub system: String,
    pub channels: usize,
    pub ops: usize,
    pub arch: Option<PathBuf>,
    pub override_grid: bool,
    pub seed: u64,
    pub freeze: bool,
    pub prior_heads: bool,
    pub aug_copies: usize,
    pub aug_sigma: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub lambda: f64,
    pub anneal_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            data: None,
            system: "cascade".into(),
            channels: 32,
            ops: 3,
            arch: None,
            override_grid: false,
            seed: 0,
            freeze: true,
            prior_heads: true,
            aug_copies: 5,
            aug_sigma: 0.03,
            epochs: 30,
            lr: 1e-3,
            batch_size: 32,
            patience: 5,
            val_fraction: 0.1,
            lambda: 0.1,
            anneal_epochs: 10,
        }
    }
}

// ------------------------------------------------------------- evaluation family

/// Model, data and exit policy flags shared by the evaluation commands.
#[derive(Args, Serialize, Debug, Clone)]
pub struct TargetFlags {
    /// Model file written by train or quantize
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Dataset directory
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Dataset split to evaluate: train or test [default: test]
    #[arg(long)]
    pub split: Option<Split>,
    /// Worker threads [default: 1]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct PolicyFlags {
    /// Exit threshold on uncertainty; 0 always runs the deep exit [default: 0]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Exit rule: all_heads, any_head or per_head [default: all_heads]
    #[arg(long)]
    pub rule: Option<ExitRule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub out_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub split: Split,
    pub jobs: usize,
    pub tau: f64,
    pub rule: ExitRule,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            model: None,
            data: None,
            split: Split::Test,
            jobs: 1,
            tau: 0.0,
            rule: ExitRule::AllHeads,
        }
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct EvalFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyFlags,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct InferFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyFlags,
    /// Also write every stage's raw head outputs to logits.json
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub keep_logits: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub out_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub split: Split,
    pub jobs: usize,
    pub tau: f64,
    pub rule: ExitRule,
    pub keep_logits: bool,
}

impl Default for InferConfig {
    fn default() -> Self {
        let e = EvalConfig::default();
        Self {
            out_dir: e.out_dir,
            model: None,
            data: None,
            split: e.split,
            jobs: e.jobs,
            tau: e.tau,
            rule: e.rule,
            keep_logits: false,
        }
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct QuantizeFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetFlags,
    /// Training-split samples used to calibrate activation ranges [default: 128]
    #[arg(long)]
    pub calib_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeConfig {
    pub out_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub split: Split,
    pub jobs: usize,
    pub calib_samples: usize,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self { out_dir: "out".into(), model: None, data: None, split: Split::Test, jobs: 1, calib_samples: 128 }
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ProfileFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetFlags,
    /// Thresholds as start:stop:step (inclusive) or a comma list [default: 0:1:0.1]
    #[arg(long)]
    pub tau_grid: Option<String>,
    /// Exit rule: all_heads, any_head or per_head [default: all_heads]
    #[arg(long)]
    pub rule: Option<ExitRule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub out_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub split: Split,
    pub jobs: usize,
    pub tau_grid: String,
    pub rule: ExitRule,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            model: None,
            data: None,
            split: Split::Test,
            jobs: 1,
            tau_grid: "0:1:0.1".into(),
            rule: ExitRule::AllHeads,
        }
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct RobustnessFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyFlags,
    /// Corruption levels, comma separated `gaussian:K` (noise sigma K times the
    /// signal RMS) or `zero_mask:F` (fraction F zeroed); the clean level is
    /// added first when missing [default: gaussian:1,gaussian:3,zero_mask:0.5,zero_mask:1]
    #[arg(long)]
    pub grid: Option<String>,
    /// Corruption seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub out_dir: PathBuf,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub split: Split,
    pub jobs: usize,
    pub tau: f64,
    pub rule: ExitRule,
    pub grid: String,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            model: None,
            data: None,
            split: Split::Test,
            jobs: 1,
            tau: 0.0,
            rule: ExitRule::AllHeads,
            grid: "gaussian:1,gaussian:3,zero_mask:0.5,zero_mask:1".into(),
            seed: 0,
        }
    }
}
