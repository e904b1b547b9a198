use hyperspn::circuit::StructureConfig;
use hyperspn::data::{gen_synthetic_with, read_matrix, write_dataset, SyntheticConfig};
use hyperspn_cli::commands::{self, DataSource};
use hyperspn_cli::experiment::run_experiment;
use hyperspn_cli::{CliError, ExperimentSpec, ModelFile, Variant};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn hyperspn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperspn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn tiny_dataset(dir: &Path) {
    let mut ds = gen_synthetic_with(
        &SyntheticConfig {
            vars: 8,
            rows: 300,
            noise: 1.0,
        },
        5,
    );
    ds.name = "tiny".into();
    write_dataset(dir, &ds).unwrap();
}

const SMALL: &[&str] = &[
    "--k",
    "2",
    "--replicas",
    "3",
    "--max-epochs",
    "3",
    "--batch",
    "50",
];

fn train_args<'a>(data: &'a str, out: &'a str, variant: &'a str) -> Vec<&'a str> {
    let mut args = vec![
        "train",
        "--data-dir",
        data,
        "--dataset",
        "tiny",
        "--variant",
        variant,
        "--out",
        out,
    ];
    args.extend_from_slice(SMALL);
    args
}

#[test]
fn info_reports_counts() {
    let v = json(&hyperspn(&[
        "info",
        "--vars",
        "1000",
        "--k",
        "10",
        "--replicas",
        "10",
    ]));
    assert_eq!(v["param_count"], 1_198_110);
    assert_eq!(v["hyper_param_count"], 102_600);
    assert_eq!(v["sectors_per_replica"], 1999);
    assert!(v["peak_live_vectors"].as_u64() <= v["live_vector_bound"].as_u64());
}

#[test]
fn train_writes_artifacts_and_eval_reproduces_the_test_score() {
    let data = tempfile::tempdir().unwrap();
    tiny_dataset(data.path());
    let out = tempfile::tempdir().unwrap();
    let (d, o) = (data.path().to_str().unwrap(), out.path().to_str().unwrap());
    let summary = json(&hyperspn(&train_args(d, o, "hyper")));
    assert_eq!(summary["variant"], "hyper");
    assert_eq!(summary["grid"].as_array().unwrap().len(), 3);
    for file in ["model.hpc", "history.csv", "summary.json"] {
        assert!(out.path().join(file).exists(), "{file}");
    }
    let history = std::fs::read_to_string(out.path().join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,steps,train_nll,valid_ll\n"));

    let model = out.path().join("model.hpc");
    let eval = json(&hyperspn(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--data-dir",
        d,
        "--dataset",
        "tiny",
    ]));
    assert_eq!(eval["mean"], summary["test_ll"]);
    let described = json(&hyperspn(&["info", "--model", model.to_str().unwrap()]));
    assert_eq!(described["trainable_count"], summary["trainable_count"]);
}

#[test]
fn training_summaries_are_reproducible() {
    let data = tempfile::tempdir().unwrap();
    tiny_dataset(data.path());
    let d = data.path().to_str().unwrap();
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let out = tempfile::tempdir().unwrap();
            json(&hyperspn(&train_args(
                d,
                out.path().to_str().unwrap(),
                "plain",
            )));
            std::fs::read_to_string(out.path().join("summary.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn sample_and_parzen_round_trip_through_files() {
    let data = tempfile::tempdir().unwrap();
    tiny_dataset(data.path());
    let out = tempfile::tempdir().unwrap();
    let (d, o) = (data.path().to_str().unwrap(), out.path().to_str().unwrap());
    json(&hyperspn(&train_args(d, o, "plain")));
    let samples = out.path().join("samples.data");
    let model = out.path().join("model.hpc");
    let v = json(&hyperspn(&[
        "sample",
        "--model",
        model.to_str().unwrap(),
        "--count",
        "40",
        "--out",
        samples.to_str().unwrap(),
    ]));
    assert_eq!(v["rows"], 40);
    assert_eq!(read_matrix(&samples).unwrap().cols(), 8);
    let test = data.path().join("tiny.test.data");
    let p = json(&hyperspn(&[
        "parzen",
        "--test",
        test.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
    ]));
    assert!(p["parzen"].as_f64().unwrap().is_finite());
}

#[test]
fn synth_writes_the_three_splits() {
    let out = tempfile::tempdir().unwrap();
    let v = json(&hyperspn(&["synth", "--out", out.path().to_str().unwrap()]));
    assert_eq!(v["vars"], 256);
    for split in ["train", "valid", "test"] {
        assert!(out.path().join(format!("synthetic.{split}.data")).exists());
    }
}

#[test]
fn exit_codes_follow_the_error_class() {
    assert_eq!(hyperspn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hyperspn(&["train", "--k", "many"]).status.code(), Some(1));
    assert_eq!(
        hyperspn(&["train", "--dataset", "nltcs"]).status.code(),
        Some(1)
    );
    let empty = tempfile::tempdir().unwrap();
    let missing = hyperspn(&[
        "eval",
        "--model",
        "nope.hpc",
        "--data-dir",
        empty.path().to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    let junk = empty.path().join("junk.hpc");
    std::fs::write(&junk, b"not a model").unwrap();
    let bad = hyperspn(&["info", "--model", junk.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("magic"));
    assert_eq!(hyperspn(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_trains_three_presets() {
    let data = tempfile::tempdir().unwrap();
    tiny_dataset(data.path());
    let out = tempfile::tempdir().unwrap();
    let mut args = vec![
        "compare",
        "--data-dir",
        data.path().to_str().unwrap(),
        "--dataset",
        "tiny",
        "--weight-decay",
        "1e-4",
        "--out",
        out.path().to_str().unwrap(),
        "--embed-dim",
        "2",
    ];
    args.extend_from_slice(SMALL);
    let v = json(&hyperspn(&args));
    let names: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["model"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["spn-large", "spn-small", "hyperspn"]);
    let curves = std::fs::read_to_string(out.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3 * 3);
    let table: Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("compare.json")).unwrap())
            .unwrap();
    assert!(table["spn-small"]["width"].as_u64() <= Some(2));
    for name in ["spn-large", "spn-small", "hyperspn"] {
        ModelFile::load(out.path().join(format!("{name}.hpc"))).unwrap();
    }
}

#[test]
fn experiment_rejects_mismatched_data() {
    let ds = gen_synthetic_with(
        &SyntheticConfig {
            vars: 6,
            rows: 40,
            noise: 1.0,
        },
        0,
    );
    let spec = ExperimentSpec::new(Variant::Plain, StructureConfig::new(7, 2, 1, 0));
    let err = run_experiment(&spec, &ds, |_, _| {}).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let mut empty = spec.clone();
    empty.weight_decays.clear();
    assert!(matches!(
        run_experiment(&empty, &ds, |_, _| {}),
        Err(CliError::Usage(_))
    ));
    assert!(matches!(
        DataSource::resolve(None, "nltcs", 0),
        Err(CliError::Usage(_))
    ));
    assert_eq!(
        commands::split_of(ds, "holdout").unwrap_err().exit_code(),
        1
    );
}
