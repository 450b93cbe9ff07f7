use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qar_mass::model_core::Channel;
use qar_mass_cli::commands::{PreprocessSummary, SplitFile};
use qar_mass_cli::records::{read_features, read_manifest, read_record, write_record};

const SMALL: &str = r#"
seed = 5

[simulate]
n_aircraft = 3
flights_per_aircraft = 3
target_altitude_range = [4000.0, 5000.0]

[train]
regressors = ["mlp", "ridge"]
predict_with = "ridge"
unknown_registration = true

[train.mlp]
hidden_depth = 3
layer_width = 32
max_epochs = 25
"#;

fn qar(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("config.toml");
    if !config.exists() {
        std::fs::write(&config, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_qar-mass"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("run"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = qar(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path) {
    for verb in ["simulate", "preprocess", "train", "evaluate", "report"] {
        ok(dir, &[verb]);
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_writes_one_record_per_flight_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate"]);
    let run = dir.path().join("run");
    let manifest = read_manifest(&run.join("manifest.csv")).unwrap();
    assert_eq!(manifest.len(), 9);
    assert_eq!(files_under(&run.join("records")).len(), 9);
    for e in &manifest {
        assert!((227_409.0..=350_942.0).contains(&e.initial_mass_kg));
        let rec = read_record(&run.join("records").join(&e.record)).unwrap();
        assert_eq!(rec.len(), e.n_samples);
        assert_eq!(rec.flight_id, e.flight_id);
    }
    let first = std::fs::read(run.join("manifest.csv")).unwrap();
    ok(dir.path(), &["simulate"]);
    assert_eq!(std::fs::read(run.join("manifest.csv")).unwrap(), first);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (ra, rb) = (a.path().join("run"), b.path().join("run"));
    let files = files_under(&ra);
    assert_eq!(files, files_under(&rb));
    for f in ["report.md", "eval/eval_mlp.json", "eval/comparison.csv", "models/model_mlp.json", "eval/scatter_ridge.svg"] {
        assert!(files.contains(&PathBuf::from(f)), "missing {f}");
    }
    for f in &files {
        assert!(std::fs::read(ra.join(f)).unwrap() == std::fs::read(rb.join(f)).unwrap(), "{} differs", f.display());
    }

    // evaluate again from the stored bundles
    let before = std::fs::read(ra.join("eval/eval_ridge.json")).unwrap();
    ok(a.path(), &["evaluate"]);
    assert_eq!(std::fs::read(ra.join("eval/eval_ridge.json")).unwrap(), before);

    let summary: PreprocessSummary = serde_json::from_slice(&std::fs::read(ra.join("preprocess_summary.json")).unwrap()).unwrap();
    assert_eq!((summary.n_records, summary.n_processed, summary.n_rejected), (9, 9, 0));
    for f in &summary.flights {
        let t = read_features(&ra.join(&f.features)).unwrap();
        assert_eq!(t.rows.len(), f.rows);
        assert_eq!(f.rows, f.segment_end - f.segment_start);
    }
    let split: SplitFile = serde_json::from_slice(&std::fs::read(ra.join("models/split.json")).unwrap()).unwrap();
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (5, 2, 2));
    let comparison = std::fs::read_to_string(ra.join("eval/comparison.csv")).unwrap();
    assert!(comparison.lines().any(|l| l.starts_with("MLPNN,test,2,")));
    assert!(comparison.lines().any(|l| l.starts_with("RR,test,2,")));
    let report = std::fs::read_to_string(ra.join("report.md")).unwrap();
    assert!(report.contains("| MLPNN |") && report.contains("| RR |"));
}

#[test]
fn corrupted_mass_channel_rejects_exactly_that_flight() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate"]);
    let records = dir.path().join("run/records");
    let victim = records.join("B-7702-F002.csv");
    let mut rec = read_record(&victim).unwrap();
    // mass falls 2 kg/s slower than the fuel flow says
    for (i, s) in rec.samples.iter_mut().enumerate() {
        s.set(Channel::M, s.m + 2.0 * i as f64);
    }
    write_record(&victim, &rec).unwrap();
    std::fs::write(records.join("broken.csv"), "no metadata\n").unwrap();

    ok(dir.path(), &["preprocess"]);
    let summary: PreprocessSummary =
        serde_json::from_slice(&std::fs::read(dir.path().join("run/preprocess_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.n_records, 10);
    assert_eq!(summary.n_processed, 8);
    assert_eq!(summary.rejected.len(), 2);
    let r = summary.rejected.iter().find(|r| r.record == "B-7702-F002.csv").unwrap();
    assert_eq!(r.reason, "sum-fluctuation ≥ L");
    assert_eq!(r.flight_id.as_deref(), Some("B-7702-F002"));
    assert!(summary.rejected.iter().any(|r| r.record == "broken.csv" && r.flight_id.is_none()));
    assert_eq!(summary.cleaning.flights_rejected, 1);
}

#[test]
fn predict_reproduces_evaluation_estimates() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let run = dir.path().join("run");
    ok(dir.path(), &["predict"]);
    // evaluate's per-flight estimates, keyed by flight
    let text = std::fs::read_to_string(run.join("eval/flights_ridge.csv")).unwrap();
    let mut evaluated = std::collections::BTreeMap::new();
    for row in csv::Reader::from_reader(text.as_bytes()).records() {
        let row = row.unwrap();
        evaluated.insert(row[1].to_string(), (row[0].to_string(), row[4].parse::<f64>().unwrap()));
    }
    let text = std::fs::read_to_string(run.join("predictions.csv")).unwrap();
    let mut n = 0;
    for row in csv::Reader::from_reader(text.as_bytes()).records() {
        let row = row.unwrap();
        assert_eq!(&row[3], "ok");
        let predicted: f64 = row[4].parse().unwrap();
        let (partition, expected) = &evaluated[&row[1]];
        assert_eq!(predicted, *expected, "{}", &row[1]);
        if partition == "train" {
            let err: f64 = row[7].parse().unwrap();
            assert!(err.abs() < 5.0, "{} off by {err}%", &row[1]);
        }
        n += 1;
    }
    assert_eq!(n, 9);

    // an explicit record list, one of them unusable
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# reg=X\nt_s\n").unwrap();
    let rec = run.join("records/B-7701-F001.csv");
    ok(dir.path(), &["predict", rec.to_str().unwrap(), bad.to_str().unwrap()]);
    let text = std::fs::read_to_string(run.join("predictions.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("B-7701-F001.csv,B-7701-F001,B-7701,ok,"));
    assert!(lines[2].contains("sample_interval_s"));
}

#[test]
fn exit_codes_follow_error_categories() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| qar(dir.path(), args).status.code().unwrap();

    std::fs::write(dir.path().join("config.toml"), "[train.mlp]\nhidden_depth = 12\n").unwrap();
    let out = qar(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config.toml:2:"));

    std::fs::write(dir.path().join("config.toml"), "").unwrap();
    assert_eq!(code(&["train"]), 3);

    std::fs::write(dir.path().join("config.toml"), "[simulate]\nn_aircraft = 1\nflights_per_aircraft = 3\ntarget_altitude_range = [4000.0, 5000.0]\n").unwrap();
    assert_eq!(code(&["simulate"]), 0);
    assert_eq!(code(&["preprocess"]), 0);
    assert_eq!(code(&["train"]), 4);

    std::fs::write(dir.path().join("config.toml"), "[simulate]\nn_aircraft = 1\nflights_per_aircraft = 1\n[simulate.base_model]\ncl_max = 0.3\n").unwrap();
    assert_eq!(code(&["simulate"]), 5);

    assert_eq!(code(&["frobnicate"]), 2);
}
