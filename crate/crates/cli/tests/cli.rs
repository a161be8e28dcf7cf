use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hfttc_core::model::{Model, ModelConfig};

fn hfttc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfttc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("HFTTC_OUT")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three generated recordings written under `dir`.
fn corpus(dir: &Path) -> Vec<PathBuf> {
    let out = hfttc(&[
        "corpus",
        "--recordings",
        "3",
        "--duration",
        "10",
        "--seed",
        "2",
        "--out",
        s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (0..3).map(|k| dir.join(format!("synth_{k:03}.csv"))).collect()
}

fn with_data<'a>(mut args: Vec<&'a str>, data: &'a [PathBuf]) -> Vec<&'a str> {
    for d in data {
        args.extend(["--data", s(d)]);
    }
    args
}

#[test]
fn missing_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = hfttc(&["train", "--data", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"steps": 3, "learning_rate": 0.1}"#).unwrap();
    let out = hfttc(&["train", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn bad_flag_value_exits_2() {
    assert_eq!(hfttc(&["train", "--steps", "many"]).status.code(), Some(2));
    assert_eq!(
        hfttc(&["evaluate", "--behavior", "reckless", "--data", "x.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let data = corpus(&tmp.path().join("corpus"));
    let run = tmp.path().join("run");
    let out = hfttc(&with_data(
        vec![
            "train",
            "--lr",
            "0",
            "--steps",
            "3",
            "--d-model",
            "16",
            "--seed",
            "9",
            "--out",
            s(&run),
        ],
        &data,
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning rate is zero"));

    let fresh = tmp.path().join("fresh.ckpt");
    Model::new(
        ModelConfig {
            d_model: 16,
            ..ModelConfig::default()
        },
        9,
    )
    .unwrap()
    .save(&fresh)
    .unwrap();
    let trained = Model::load(&run.join("model.ckpt"), None).unwrap();
    let fresh = Model::load(&fresh, None).unwrap();
    assert_eq!(trained.params(), fresh.params());
}

#[test]
fn train_evaluate_and_checkpoint_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = corpus(&tmp.path().join("corpus"));
    let run = tmp.path().join("run");

    // config file supplies the step count; the flag overrides its seed
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"steps": 4, "seed": 1, "d_model": 16}"#).unwrap();
    let out = hfttc(&with_data(
        vec!["train", "--config", s(&cfg), "--seed", "3", "--out", s(&run)],
        &data,
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let loss = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("train_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["train"]["seed"], 3);
    assert_eq!(summary["model"]["d_model"], 16);

    let ckpt = run.join("model.ckpt");
    let eval = tmp.path().join("eval");
    let out = hfttc(&with_data(
        vec![
            "evaluate",
            "--checkpoint",
            s(&ckpt),
            "--behavior",
            "all",
            "--eval-split",
            "all",
            "--out",
            s(&eval),
        ],
        &data,
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    let blocks: Vec<&str> = metrics["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["behavior"].as_str().unwrap())
        .collect();
    assert_eq!(blocks, ["last_step", "average", "self_prediction", "constant_velocity"]);
    let table = std::fs::read_to_string(eval.join("rmse_table.csv")).unwrap();
    assert!(table.starts_with("behavior,ade,fde,mae,rmse,rmse_f10"));
    assert_eq!(table.lines().count(), 5);

    // hyperparameters that disagree with the sidecar are rejected
    let out = hfttc(&with_data(
        vec!["evaluate", "--checkpoint", s(&ckpt), "--modes", "3", "--out", s(&eval)],
        &data,
    ));
    assert_eq!(out.status.code(), Some(2));

    // a topology ablation can be switched at evaluation
    let out = hfttc(&with_data(
        vec![
            "evaluate",
            "--checkpoint",
            s(&ckpt),
            "--ablate",
            "gnn",
            "--eval-split",
            "all",
            "--out",
            s(&eval),
        ],
        &data,
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // safety: one csv and one svg per pair and behavior
    let safety = tmp.path().join("safety");
    let out = hfttc(&with_data(
        vec![
            "safety",
            "--checkpoint",
            s(&ckpt),
            "--behavior",
            "average",
            "--traditional",
            "--out",
            s(&safety),
        ],
        &data[..1],
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(safety.join("risk_report.json")).unwrap()).unwrap();
    let pairs: usize = report
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["pairs"].as_array().unwrap().len())
        .sum();
    let count = |ext: &str| {
        std::fs::read_dir(&safety)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
            .count()
    };
    assert!(pairs > 0);
    assert_eq!(count("csv"), pairs);
    assert_eq!(count("svg"), pairs);
}

#[test]
fn scenario_without_checkpoint_uses_scripted_futures() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/platoon_brake.json");
    let out = hfttc(&["scenario", s(&spec), "--behavior", "last_step", "--out", s(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("risk_report.json")).unwrap()).unwrap();
    let first = &report.as_array().unwrap()[0];
    assert_eq!(first["predictor"], "ground_truth");
    // the braking platoon ahead produces at least one crossing for the host
    assert!(first["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|p| !p["ttc_atoms"].as_array().unwrap().is_empty()));
}
