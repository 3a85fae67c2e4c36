use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cascade_edl::eval::{evaluate_system, exit_profile, parse_tau_grid, robustness_eval, System, SystemKind};
use cascade_edl::evidential::LossConfig;
use cascade_edl::model::{build_model, BackboneConfig, CascadeModel, Container, Depth, KIND_BASELINE, KIND_CASCADE};
use cascade_edl::runtime::{
    decision_agreement, estimate_memory, infer_with_exits, quantize_model, CostReport, ExitPolicy, Precision,
    QuantizedModel, KIND_CASCADE_INT8,
};
use cascade_edl::signal::{
    featurize, gen_synthetic, Corruption, Dataset, FeatureConfig, FeatureSet, Preprocess, Split, Standardizer,
    SyntheticSpec,
};
use cascade_edl::train::{
    cascade_train, search, train_baseline, AugConfig, Baseline, BaselineKind, Hyper, SearchSpace,
};
use serde::{Deserialize, Serialize};

use crate::cli::*;
use crate::config::{required, resolve, write_snapshot};
use crate::error::{io_err, CliError, CliResult};

pub const MODEL_FILE: &str = "model.ucm";
pub const INT8_MODEL_FILE: &str = "model_int8.ucm";
pub const BEST_CONFIG_FILE: &str = "best_config.json";

/// Files a command wrote, in write order.
pub type Written = Vec<PathBuf>;

fn prepare_out(out_dir: &Path) -> CliResult<()> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> CliResult<PathBuf> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

fn load_dataset(dir: &Path) -> CliResult<Dataset> {
    if !dir.join(cascade_edl::signal::MANIFEST_FILE).is_file() {
        return Err(CliError::Core(cascade_edl::Error::Data(format!("{} is not a dataset directory", dir.display()))));
    }
    Ok(Dataset::load(dir)?)
}

/// Fits the feature standardizer on the train split.
fn training_features(ds: &Dataset) -> CliResult<(Preprocess, FeatureSet)> {
    let train: Vec<_> = ds.split(Split::Train).collect();
    if train.is_empty() {
        return Err(cascade_edl::Error::Data("dataset has no training samples".into()).into());
    }
    let features = FeatureConfig::for_rate(ds.sample_rate);
    let norm = Standardizer::fit(&featurize(train.iter().copied(), &features)?)?;
    let pre = Preprocess { features, norm: Some(norm) };
    let set = pre.prepare(train)?;
    Ok((pre, set))
}

fn split_features(ds: &Dataset, pre: &Preprocess, split: Split) -> CliResult<FeatureSet> {
    let set = pre.prepare(ds.split(split))?;
    if set.is_empty() {
        return Err(cascade_edl::Error::Data(format!("dataset has no {} samples", split.name())).into());
    }
    Ok(set)
}

fn hyper(
    seed: u64,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    patience: usize,
    val_fraction: f64,
    lambda: f64,
    anneal_epochs: usize,
) -> CliResult<Hyper> {
    let h = Hyper {
        max_epochs: epochs,
        batch_size,
        lr,
        patience,
        val_fraction,
        seed,
        loss: LossConfig { lambda, anneal_epochs },
        ..Default::default()
    };
    h.validate()?;
    Ok(h)
}

/// Any trained system plus the preprocessing stored with it.
fn load_system(path: &Path) -> CliResult<(System, Preprocess)> {
    let c = Container::read(path)?;
    let (system, pre) = match c.kind() {
        KIND_CASCADE => {
            let (m, p) = CascadeModel::from_container(&c)?;
            (System::Cascade(m), p)
        }
        KIND_CASCADE_INT8 => {
            let (m, p) = QuantizedModel::from_container(&c)?;
            (System::CascadeInt8(m), p)
        }
        KIND_BASELINE => {
            let (b, p) = Baseline::from_container(&c)?;
            (System::Baseline(b), p)
        }
        other => {
            return Err(CliError::Mismatch(format!(
                "{}: model kind `{other}` cannot be evaluated (cascade|cascade_int8|baseline)",
                path.display()
            )))
        }
    };
    let pre = pre.ok_or_else(|| CliError::Mismatch(format!("{} stores no preprocessing", path.display())))?;
    Ok((system, pre))
}

fn system_config(system: &System) -> &BackboneConfig {
    match system {
        System::Cascade(m) => &m.config,
        System::CascadeInt8(m) => &m.config,
        System::Baseline(b) => b.config(),
    }
}

fn check_fit(cfg: &BackboneConfig, pre: &Preprocess, ds: &Dataset) -> CliResult<()> {
    if ds.num_events() != cfg.events {
        return Err(CliError::Mismatch(format!("model has {} events, dataset has {}", cfg.events, ds.num_events())));
    }
    if (pre.features.sample_rate - ds.sample_rate).abs() > 1e-9 {
        return Err(CliError::Mismatch(format!(
            "model expects {} Hz signals, dataset is {} Hz",
            pre.features.sample_rate, ds.sample_rate
        )));
    }
    let shape = pre.input_shape(ds.signal_len())?;
    if shape != cfg.input_shape {
        return Err(CliError::Mismatch(format!(
            "model input {:?} does not match dataset features {shape:?}",
            cfg.input_shape
        )));
    }
    Ok(())
}

fn cost_by_depth(cfg: &BackboneConfig, precision: Precision) -> CliResult<Vec<CostReport>> {
    Ok(Depth::ALL.iter().map(|&d| estimate_memory(cfg, precision, d)).collect::<Result<_, _>>()?)
}

/// `gaussian:K` or `zero_mask:F`, comma separated.
pub fn parse_corruption_grid(spec: &str) -> CliResult<Vec<Corruption>> {
    spec.split(',')
        .map(|item| {
            let bad = || CliError::Config(format!("bad corruption `{item}` (use gaussian:K or zero_mask:F)"));
            let (mode, param) = item.trim().split_once(':').ok_or_else(bad)?;
            let v: f64 = param.trim().parse().map_err(|_| bad())?;
            let c = match mode.trim() {
                "gaussian" => Corruption::Gaussian(v),
                "zero_mask" => Corruption::ZeroMask(v),
                _ => return Err(bad()),
            };
            c.validate()?;
            Ok(c)
        })
        .collect()
}

// ------------------------------------------------------------- commands

pub fn gen_data(flags: &GenDataFlags) -> CliResult<Written> {
    let cfg: GenDataConfig = resolve("gen-data", flags.common.config.as_deref(), flags)?;
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(CliError::Config(format!("test fraction {} outside [0, 1)", cfg.test_fraction)));
    }
    if cfg.n == 0 {
        return Err(CliError::Config("--n must be >= 1".into()));
    }
    prepare_out(&cfg.out_dir)?;
    let spec = SyntheticSpec {
        events: cfg.events,
        n_per_event: cfg.n,
        snr_db: (cfg.snr_min, cfg.snr_max),
        seed: cfg.seed,
        sample_rate: cfg.sample_rate,
        duration_s: cfg.duration,
        ..Default::default()
    };
    let mut ds = gen_synthetic(&spec)?;
    if cfg.test_fraction > 0.0 {
        ds.assign_test_split(cfg.test_fraction, cfg.seed)?;
    }
    ds.save(&cfg.out_dir)?;
    let snapshot = write_snapshot(&cfg.out_dir, "gen-data", &cfg)?;
    Ok(vec![
        cfg.out_dir.join(cascade_edl::signal::MANIFEST_FILE),
        cfg.out_dir.join("train.csv"),
        cfg.out_dir.join("test.csv"),
        snapshot,
    ])
}

#[derive(Serialize, Deserialize)]
pub struct BestConfig {
    pub config: BackboneConfig,
    pub accuracy: f64,
    pub macs: u64,
    pub score: f64,
}

pub fn search_cmd(flags: &SearchFlags) -> CliResult<Written> {
    let cfg: SearchConfig = resolve("search", flags.common.config.as_deref(), flags)?;
    let data = required(&cfg.data, "data")?;
    let h = hyper(
        cfg.seed,
        cfg.epochs,
        cfg.lr,
        cfg.batch_size,
        cfg.patience,
        cfg.val_fraction,
        cfg.lambda,
        cfg.anneal_epochs,
    )?;
    let space = SearchSpace {
        channels: cfg.channels.clone(),
        ops: cfg.ops.clone(),
        off_grid: cfg.override_grid,
        denominator: cfg.denominator,
    };
    space.validate()?;
    if cfg.jobs == 0 {
        return Err(CliError::Config("--jobs must be >= 1".into()));
    }
    let ds = load_dataset(&data)?;
    prepare_out(&cfg.out_dir)?;
    let (_, set) = training_features(&ds)?;
    let result = search(&space, &set, &h, cfg.jobs)?;
    let table = cfg.out_dir.join("search_table.csv");
    result.save_csv(&table)?;
    let row = result.best_row();
    let best = BestConfig { config: result.best.clone(), accuracy: row.accuracy, macs: row.macs, score: row.score };
    let best_path = write_json(cfg.out_dir.join(BEST_CONFIG_FILE), &best)?;
    let snapshot = write_snapshot(&cfg.out_dir, "search", &cfg)?;
    Ok(vec![table, best_path, snapshot])
}

#[derive(Serialize)]
struct TrainReport<'a, R: Serialize> {
    system: &'a str,
    config: &'a BackboneConfig,
    num_params: usize,
    phases: R,
}

pub fn train_cmd(flags: &TrainFlags) -> CliResult<Written> {
    let mut cfg: TrainConfig = resolve("train", flags.common.config.as_deref(), flags)?;
    if flags.no_freeze {
        cfg.freeze = false;
    }
    if flags.no_prior_heads {
        cfg.prior_heads = false;
    }
    let data = required(&cfg.data, "data")?;
    let kind: SystemKind = cfg.system.parse()?;
    if kind == SystemKind::CascadeInt8 {
        return Err(CliError::Config("cascade_int8 is produced by `quantize`, not `train`".into()));
    }
    let mut h = hyper(
        cfg.seed,
        cfg.epochs,
        cfg.lr,
        cfg.batch_size,
        cfg.patience,
        cfg.val_fraction,
        cfg.lambda,
        cfg.anneal_epochs,
    )?;
    h.freeze = cfg.freeze;
    h.prior_heads = cfg.prior_heads;
    let (mut channels, mut ops, mut off_grid) = (cfg.channels, cfg.ops, cfg.override_grid);
    if let Some(arch) = &cfg.arch {
        let text = fs::read_to_string(arch).map_err(io_err(arch))?;
        let best: BestConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", arch.display())))?;
        channels = best.config.channels;
        ops = best.config.ops;
        off_grid |= best.config.off_grid;
    }
    let ds = load_dataset(&data)?;
    prepare_out(&cfg.out_dir)?;
    let (pre, set) = training_features(&ds)?;
    let mut arch = BackboneConfig::new(channels, ops, pre.input_shape(ds.signal_len())?, ds.num_events());
    if off_grid {
        arch = arch.off_grid();
    }
    arch.validate()?;
    let model_path = cfg.out_dir.join(MODEL_FILE);
    let report_path = cfg.out_dir.join("train_report.json");
    match kind {
        SystemKind::Cascade => {
            let mut model = build_model(&arch, cfg.seed)?;
            let report = cascade_train(&mut model, &set, &h)?;
            model.save(&model_path, Some(&pre))?;
            let r = TrainReport {
                system: kind.name(),
                config: &arch,
                num_params: model.num_params(),
                phases: &report.phases,
            };
            write_json(report_path.clone(), &r)?;
        }
        _ => {
            let bk: BaselineKind = kind.name().parse()?;
            let aug = AugConfig { copies: cfg.aug_copies, sigma: cfg.aug_sigma, seed: cfg.seed };
            let (baseline, reports) = train_baseline(bk, &arch, &set, &h, aug)?;
            baseline.save(&model_path, Some(&pre))?;
            let r =
                TrainReport { system: kind.name(), config: &arch, num_params: baseline.num_params(), phases: &reports };
            write_json(report_path.clone(), &r)?;
        }
    }
    let snapshot = write_snapshot(&cfg.out_dir, "train", &cfg)?;
    Ok(vec![model_path, report_path, snapshot])
}

/// Loads model and data and checks they fit together.
fn target(model: &Option<PathBuf>, data: &Option<PathBuf>) -> CliResult<(System, Preprocess, Dataset)> {
    let model = required(model, "model")?;
    let data = required(data, "data")?;
    let (system, pre) = load_system(&model)?;
    let ds = load_dataset(&data)?;
    check_fit(system_config(&system), &pre, &ds)?;
    Ok((system, pre, ds))
}

pub fn eval_cmd(flags: &EvalFlags) -> CliResult<Written> {
    let cfg: EvalConfig = resolve("eval", flags.common.config.as_deref(), flags)?;
    let policy = ExitPolicy::new(cfg.tau, cfg.rule)?;
    let (system, pre, ds) = target(&cfg.model, &cfg.data)?;
    prepare_out(&cfg.out_dir)?;
    let set = split_features(&ds, &pre, cfg.split)?;
    let ev = evaluate_system(system.kind(), &system, &set, &policy, cfg.jobs.max(1))?;
    let report = write_json(cfg.out_dir.join("eval_report.json"), &ev.report)?;
    let events = cfg.out_dir.join("eval_events.csv");
    let mut w = csv::Writer::from_path(&events).map_err(cascade_edl::Error::from)?;
    w.write_record(["event", "n", "accuracy", "brier", "nll", "ece"]).map_err(cascade_edl::Error::from)?;
    for (name, m) in ds.events.iter().zip(&ev.report.calibration.per_event) {
        let rec = [
            name.clone(),
            m.n.to_string(),
            m.accuracy.to_string(),
            m.brier.to_string(),
            m.nll.to_string(),
            m.ece.to_string(),
        ];
        w.write_record(&rec).map_err(cascade_edl::Error::from)?;
    }
    w.flush().map_err(io_err(&events))?;
    let snapshot = write_snapshot(&cfg.out_dir, "eval", &cfg)?;
    Ok(vec![report, events, snapshot])
}

pub fn infer_cmd(flags: &InferFlags) -> CliResult<Written> {
    let cfg: InferConfig = resolve("infer", flags.common.config.as_deref(), flags)?;
    let policy = ExitPolicy::new(cfg.tau, cfg.rule)?;
    let (system, pre, ds) = target(&cfg.model, &cfg.data)?;
    prepare_out(&cfg.out_dir)?;
    let set = split_features(&ds, &pre, cfg.split)?;
    let jobs = cfg.jobs.max(1);
    let trace = match &system {
        System::Cascade(m) => infer_with_exits(m, &set.inputs, &policy, jobs, cfg.keep_logits)?,
        System::CascadeInt8(m) => infer_with_exits(m, &set.inputs, &policy, jobs, cfg.keep_logits)?,
        System::Baseline(b) => {
            return Err(CliError::Mismatch(format!("infer needs a cascade model, got {}", b.kind.name())));
        }
    };
    let trace_path = cfg.out_dir.join("trace.csv");
    trace.write_csv(create(&trace_path)?)?;
    let summary = write_json(cfg.out_dir.join("trace_summary.json"), &trace.summary())?;
    let snapshot = write_snapshot(&cfg.out_dir, "infer", &cfg)?;
    let mut out = vec![trace_path, summary, snapshot];
    if cfg.keep_logits {
        let logits: Vec<_> = trace.samples.iter().map(|s| &s.stage_logits).collect();
        out.push(write_json(cfg.out_dir.join("logits.json"), &logits)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct QuantReport {
    calibration_samples: usize,
    split: Split,
    float_accuracy: f64,
    int8_accuracy: f64,
    accuracy_drop_pp: f64,
    decision_agreement: f64,
    weight_bytes_ratio: f64,
    param_bytes_ratio: f64,
    cost_f32: CostReport,
    cost_int8: CostReport,
}

pub fn quantize_cmd(flags: &QuantizeFlags) -> CliResult<Written> {
    let cfg: QuantizeConfig = resolve("quantize", flags.common.config.as_deref(), flags)?;
    if cfg.calib_samples == 0 {
        return Err(CliError::Config("--calib-samples must be >= 1".into()));
    }
    let (system, pre, ds) = target(&cfg.model, &cfg.data)?;
    let System::Cascade(model) = system else {
        return Err(CliError::Mismatch(format!("quantize needs a float cascade model, got {}", system.kind().name())));
    };
    prepare_out(&cfg.out_dir)?;
    let calib: Vec<_> = ds.split(Split::Train).take(cfg.calib_samples).collect();
    let calib = pre.prepare(calib)?;
    let q = quantize_model(&model, &calib.inputs)?;
    let set = split_features(&ds, &pre, cfg.split)?;
    let policy = ExitPolicy::default();
    let jobs = cfg.jobs.max(1);
    let f = evaluate_system(SystemKind::Cascade, &System::Cascade(model.clone()), &set, &policy, jobs)?;
    let agreement = decision_agreement(&model, &q, &set.inputs)?;
    let qs = System::CascadeInt8(q);
    let i = evaluate_system(SystemKind::CascadeInt8, &qs, &set, &policy, jobs)?;
    let System::CascadeInt8(q) = qs else { unreachable!() };
    let cost_f32 = estimate_memory(&model.config, Precision::F32, Depth::Deep)?;
    let cost_int8 = estimate_memory(&model.config, Precision::Int8, Depth::Deep)?;
    let (fa, ia) = (f.report.calibration.pooled.accuracy, i.report.calibration.pooled.accuracy);
    let report = QuantReport {
        calibration_samples: calib.len(),
        split: cfg.split,
        float_accuracy: fa,
        int8_accuracy: ia,
        accuracy_drop_pp: (fa - ia) * 100.0,
        decision_agreement: agreement,
        weight_bytes_ratio: cost_int8.weight_bytes as f64 / cost_f32.weight_bytes as f64,
        param_bytes_ratio: cost_int8.param_bytes as f64 / cost_f32.param_bytes as f64,
        cost_f32,
        cost_int8,
    };
    let model_path = cfg.out_dir.join(INT8_MODEL_FILE);
    q.save(&model_path, Some(&pre))?;
    let report_path = write_json(cfg.out_dir.join("quant_report.json"), &report)?;
    let snapshot = write_snapshot(&cfg.out_dir, "quantize", &cfg)?;
    Ok(vec![model_path, report_path, snapshot])
}

#[derive(Serialize)]
struct ProfileDoc<'a> {
    profile: &'a cascade_edl::eval::ExitProfile,
    cost: Vec<CostReport>,
}

pub fn profile_cmd(flags: &ProfileFlags) -> CliResult<Written> {
    let cfg: ProfileConfig = resolve("profile", flags.common.config.as_deref(), flags)?;
    let taus = parse_tau_grid(&cfg.tau_grid)?;
    let (system, pre, ds) = target(&cfg.model, &cfg.data)?;
    let precision = match &system {
        System::Cascade(_) => Precision::F32,
        System::CascadeInt8(_) => Precision::Int8,
        System::Baseline(b) => {
            return Err(CliError::Mismatch(format!("profile needs a cascade model, got {}", b.kind.name())));
        }
    };
    prepare_out(&cfg.out_dir)?;
    let set = split_features(&ds, &pre, cfg.split)?;
    let profile = exit_profile(&system, &set, &taus, cfg.rule, cfg.jobs.max(1))?;
    let csv_path = cfg.out_dir.join("profile.csv");
    profile.write_csv(create(&csv_path)?)?;
    let doc = ProfileDoc { profile: &profile, cost: cost_by_depth(system_config(&system), precision)? };
    let json = write_json(cfg.out_dir.join("profile.json"), &doc)?;
    let snapshot = write_snapshot(&cfg.out_dir, "profile", &cfg)?;
    Ok(vec![csv_path, json, snapshot])
}

pub fn robustness_cmd(flags: &RobustnessFlags) -> CliResult<Written> {
    let cfg: RobustnessConfig = resolve("robustness", flags.common.config.as_deref(), flags)?;
    let policy = ExitPolicy::new(cfg.tau, cfg.rule)?;
    let grid = parse_corruption_grid(&cfg.grid)?;
    let (system, pre, ds) = target(&cfg.model, &cfg.data)?;
    prepare_out(&cfg.out_dir)?;
    let samples: Vec<_> = ds.split(cfg.split).cloned().collect();
    let report = robustness_eval(&system, &pre, &samples, &grid, &policy, cfg.seed, cfg.jobs.max(1))?;
    let path = write_json(cfg.out_dir.join("robustness.json"), &report)?;
    let snapshot = write_snapshot(&cfg.out_dir, "robustness", &cfg)?;
    Ok(vec![path, snapshot])
}
