mod support;

use std::path::Path;
use std::process::{Command, Output};

use carprice_core::dataset::{DatasetFile, FilterReport};
use carprice_core::model::ForestModel;

fn carprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carprice"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("CARPRICE_TRAINED_AT")
        .output()
        .expect("spawn carprice")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingest_fixture(dir: &Path, rows: usize) -> std::path::PathBuf {
    let csv = dir.join("autos.csv");
    std::fs::write(&csv, support::synthetic_csv(rows, 3)).unwrap();
    let clean = dir.join("clean.json");
    ok(carprice(&["ingest", "--input", s(&csv), "--output", s(&clean)]));
    clean
}

#[test]
fn ingest_writes_dataset_and_conserved_report() {
    let dir = tempfile::tempdir().unwrap();
    let clean = ingest_fixture(dir.path(), 600);
    let report: FilterReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("clean.json.filter-report.json")).unwrap())
            .unwrap();
    assert_eq!(report.input_rows, 600);
    assert!(report.is_conserved());
    assert!(report.total_removed() > 0);
    assert!(report.removed.iter().filter(|c| c.removed > 0).count() >= 7);
    let ds = DatasetFile::load(&clean).unwrap().to_dataset().unwrap();
    assert_eq!(ds.len(), report.surviving_rows);
}

#[test]
fn ingest_honours_config_and_explicit_report_path() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("autos.csv");
    std::fs::write(&csv, support::synthetic_csv(300, 5)).unwrap();
    let cfg = dir.path().join("cleaning.toml");
    std::fs::write(&cfg, "min_power_ps = 100\n").unwrap();
    let report_path = dir.path().join("report.json");
    let clean = dir.path().join("clean.json");
    ok(carprice(&[
        "ingest",
        "--input",
        s(&csv),
        "--output",
        s(&clean),
        "--config",
        s(&cfg),
        "--report",
        s(&report_path),
    ]));
    let file = DatasetFile::load(&clean).unwrap();
    assert_eq!(file.config.min_power_ps, 100);
    let ds = file.to_dataset().unwrap();
    assert!(ds.column(carprice_core::dataset::Feature::PowerPs).all(|p| p >= 100.0));
    assert!(report_path.exists());

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = carprice(&["ingest", "--input", s(&csv), "--output", s(&clean), "--config", s(&cfg)]);
    assert!(!out.status.success());
}

#[test]
fn train_is_byte_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let clean = ingest_fixture(dir.path(), 500);
    let a = dir.path().join("a.cprf");
    let b = dir.path().join("b.cprf");
    ok(carprice(&[
        "train",
        "--input",
        s(&clean),
        "--trees",
        "50",
        "--seed",
        "7",
        "--out",
        s(&a),
    ]));
    ok(carprice(&[
        "train",
        "--input",
        s(&clean),
        "--trees",
        "50",
        "--seed",
        "7",
        "--out",
        s(&b),
        "--workers",
        "3",
    ]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let model = ForestModel::load(&a).unwrap();
    assert_eq!(model.forest.trees().len(), 50);
    assert_eq!(model.metadata.split_seed, Some(7));

    let c = dir.path().join("c.cprf");
    ok(carprice(&[
        "train",
        "--input",
        s(&clean),
        "--trees",
        "50",
        "--seed",
        "8",
        "--out",
        s(&c),
    ]));
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn grid_training_then_eval_reproduces_scores() {
    let dir = tempfile::tempdir().unwrap();
    let clean = ingest_fixture(dir.path(), 500);
    let model = dir.path().join("m.cprf");
    let train_report = dir.path().join("train.json");
    ok(carprice(&[
        "train",
        "--input",
        s(&clean),
        "--trees",
        "100",
        "--seed",
        "2",
        "--out",
        s(&model),
        "--grid",
        "--report",
        s(&train_report),
    ]));
    let train: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&train_report).unwrap()).unwrap();
    assert_eq!(train["grid"].as_array().unwrap().len(), 2);

    let eval_report = dir.path().join("eval.json");
    ok(carprice(&[
        "eval",
        "--model",
        s(&model),
        "--input",
        s(&clean),
        "--seed",
        "2",
        "--out",
        s(&eval_report),
    ]));
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&eval_report).unwrap()).unwrap();
    for key in ["trainR2", "testR2", "cvR2"] {
        assert_eq!(eval[key], train[key], "{key}");
    }
    assert!(eval["trainR2"].as_f64().unwrap() > 0.8);
}

#[test]
fn subsample_and_feature_discard_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let clean = ingest_fixture(dir.path(), 500);
    let model = dir.path().join("m.cprf");
    ok(carprice(&[
        "train",
        "--input",
        s(&clean),
        "--trees",
        "10",
        "--seed",
        "1",
        "--out",
        s(&model),
        "--subsample",
        "200",
        "--min-abs-corr",
        "0.2",
    ]));
    let m = ForestModel::load(&model).unwrap();
    assert_eq!(m.metadata.subsample, Some(200));
    assert_eq!(m.metadata.train_rows, 140);
    assert!(!m.metadata.discarded_features.is_empty());
    let eval_report = dir.path().join("eval.json");
    ok(carprice(&[
        "eval",
        "--model",
        s(&model),
        "--input",
        s(&clean),
        "--seed",
        "1",
        "--out",
        s(&eval_report),
    ]));
}

#[test]
fn eda_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let clean = ingest_fixture(dir.path(), 400);
    let out = dir.path().join("eda.json");
    ok(carprice(&["eda", "--input", s(&clean), "--out", s(&out)]));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["topBrandMeanPrice"][0]["category"], "porsche");
}

#[test]
fn eval_without_model_fails_clearly() {
    let dir = tempfile::tempdir().unwrap();
    let clean = ingest_fixture(dir.path(), 100);
    let missing = dir.path().join("nope.cprf");
    let out = carprice(&[
        "eval",
        "--model",
        s(&missing),
        "--input",
        s(&clean),
        "--seed",
        "0",
        "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("cannot load model") && stderr.contains("nope.cprf"),
        "{stderr}"
    );
}

#[test]
fn bad_flags_print_usage_and_fail() {
    let out = carprice(&["train", "--trees", "many"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("invalid value") && stderr.contains("--help"),
        "{stderr}"
    );
    let out = carprice(&["train"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(!carprice(&[]).status.success());
}

#[test]
fn serve_refuses_missing_model() {
    let out = carprice(&["serve", "--model", "/nonexistent/model.cprf", "--port", "0"]);
    assert!(!out.status.success());
}
