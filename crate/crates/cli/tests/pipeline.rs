use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cascade_edl::train::{read_table, CandidateStatus};

const BIN: &str = env!("CARGO_BIN_EXE_cascade-edl");

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env_remove("CASCADE_EDL_OUT_DIR").output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = cli(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fails_with(dir: &Path, args: &[&str], code: i32, kind: &str) {
    let out = cli(dir, args);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {err}");
    assert_eq!(err.lines().count(), 1, "error must be one line: {err:?}");
    assert!(err.starts_with(&format!("error[{kind}]: ")), "{err}");
}

fn tiny_data(dir: &Path) {
    ok(dir, &["gen-data", "--events", "3", "--n", "12", "--seed", "7", "--out-dir", "data"]);
}

fn tiny_model(dir: &Path) {
    tiny_data(dir);
    ok(
        dir,
        &[
            "train",
            "--data",
            "data",
            "--channels",
            "8",
            "--ops",
            "3",
            "--override-grid",
            "--epochs",
            "2",
            "--out-dir",
            "model",
        ],
    );
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn gen_data_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["gen-data", "--events", "3", "--n", "200", "--seed", "7", "--out-dir", "a"]);
    ok(t.path(), &["gen-data", "--events", "3", "--n", "200", "--seed", "7", "--out-dir", "b"]);
    let (a, b) = (files(&t.path().join("a")), files(&t.path().join("b")));
    assert_eq!(a.len(), 4);
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        if na.to_str() != Some("gen-data.resolved.toml") {
            assert!(da == db, "{na:?} differs");
        }
    }
    let manifest = fs::read_to_string(t.path().join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"count\": 450") && manifest.contains("\"count\": 150"));
}

#[test]
fn profile_writes_eleven_rows() {
    let t = tempfile::tempdir().unwrap();
    tiny_model(t.path());
    ok(
        t.path(),
        &["profile", "--model", "model/model.ucm", "--data", "data", "--tau-grid", "0:1:0.1", "--out-dir", "p"],
    );
    let csv = fs::read_to_string(t.path().join("p/profile.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[10].starts_with("1.0,1.0,0.0,0.0,"), "{}", rows[10]);
}

#[test]
fn search_table_winner_matches_rescan() {
    let t = tempfile::tempdir().unwrap();
    tiny_data(t.path());
    ok(
        t.path(),
        &[
            "search",
            "--data",
            "data",
            "--channels",
            "8,16",
            "--ops",
            "3,4",
            "--override-grid",
            "--epochs",
            "2",
            "--jobs",
            "2",
            "--out-dir",
            "s",
        ],
    );
    let table = read_table(&t.path().join("s/search_table.csv")).unwrap();
    assert_eq!(table.len(), 4);
    let min = table.iter().map(|r| r.macs).min().unwrap() as f64;
    let best = table
        .iter()
        .filter(|r| r.status == CandidateStatus::Ok)
        .fold(None::<&cascade_edl::train::CandidateRow>, |b, r| match b {
            Some(b) if b.accuracy / (b.macs as f64 / min) >= r.accuracy / (r.macs as f64 / min) => Some(b),
            _ => Some(r),
        })
        .unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("s/best_config.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["channels"], best.channels);
    assert_eq!(json["config"]["ops"], best.ops);

    // the winner feeds straight into training
    ok(t.path(), &["train", "--data", "data", "--arch", "s/best_config.json", "--epochs", "1", "--out-dir", "m"]);
}

#[test]
fn config_file_env_and_flags_layer() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("run.toml"), "[gen-data]\nn = 5\nseed = 3\nout_dir = \"from_file\"\n").unwrap();
    ok(t.path(), &["gen-data", "--config", "run.toml", "--seed", "4"]);
    let snap = fs::read_to_string(t.path().join("from_file/gen-data.resolved.toml")).unwrap();
    assert!(snap.contains("n = 5") && snap.contains("seed = 4"), "{snap}");

    let out = Command::new(BIN)
        .args(["gen-data", "--config", "run.toml"])
        .current_dir(t.path())
        .env("CASCADE_EDL_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(t.path().join("from_env/manifest.json").is_file());

    let out = Command::new(BIN)
        .args(["gen-data", "--n", "5", "--out-dir", "from_flag"])
        .current_dir(t.path())
        .env("CASCADE_EDL_OUT_DIR", "from_env2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(t.path().join("from_flag/manifest.json").is_file() && !t.path().join("from_env2").exists());
}

#[test]
fn failures_have_distinct_codes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fails_with(d, &["gen-data", "--bogus"], 2, "usage");
    fails_with(d, &["eval", "--data", "x"], 2, "usage");
    fails_with(d, &["gen-data", "--rule", "x"], 2, "usage");
    fs::write(d.join("bad.toml"), "[gen-data]\nsede = 1\n").unwrap();
    fails_with(d, &["gen-data", "--config", "bad.toml"], 3, "config");
    fails_with(d, &["eval", "--tau", "1.5", "--model", "m", "--data", "x"], 3, "config");
    tiny_model(d);
    fails_with(d, &["eval", "--model", "model/model.ucm", "--data", "nowhere"], 4, "data");
    fs::write(d.join("data/test.csv"), "0,1,0,0,oops\n").unwrap();
    fails_with(d, &["eval", "--model", "model/model.ucm", "--data", "data"], 4, "data");
    let bytes = fs::read(d.join("model/model.ucm")).unwrap();
    fs::write(d.join("cut.ucm"), &bytes[..bytes.len() / 2]).unwrap();
    fails_with(d, &["eval", "--model", "cut.ucm", "--data", "data"], 5, "model");
    ok(d, &["gen-data", "--events", "4", "--n", "4", "--out-dir", "four"]);
    fails_with(d, &["eval", "--model", "model/model.ucm", "--data", "four"], 6, "mismatch");
    fails_with(d, &["eval", "--model", "missing.ucm", "--data", "four"], 7, "io");
}

#[test]
fn every_pipeline_reports() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    tiny_model(d);
    let base = ["--model", "model/model.ucm", "--data", "data", "--out-dir", "r"];
    for cmd in ["eval", "infer", "quantize", "robustness"] {
        let mut args = vec![cmd];
        args.extend(base);
        ok(d, &args);
    }
    let q: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r/quant_report.json")).unwrap()).unwrap();
    assert_eq!(q["weight_bytes_ratio"], 0.25);
    let rob: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r/robustness.json")).unwrap()).unwrap();
    assert_eq!(rob["levels"].as_array().unwrap().len(), 5);
    ok(d, &["eval", "--model", "r/model_int8.ucm", "--data", "data", "--out-dir", "r8"]);
    for kind in ["softmax_single", "input_aug"] {
        ok(
            d,
            &[
                "train",
                "--data",
                "data",
                "--system",
                kind,
                "--channels",
                "8",
                "--override-grid",
                "--epochs",
                "1",
                "--out-dir",
                kind,
            ],
        );
        let model = format!("{kind}/model.ucm");
        ok(d, &["eval", "--model", &model, "--data", "data", "--out-dir", kind]);
        fails_with(d, &["infer", "--model", &model, "--data", "data"], 6, "mismatch");
    }
}
