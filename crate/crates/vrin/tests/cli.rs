use std::path::Path;
use std::process::{Command, Output};

fn vrin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrin")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = vrin(args);
    assert!(out.status.success(), "vrin {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn generate(dir: &Path, seed: &str, features: &str) {
    ok(&["--seed", seed, "generate", "--out", s(dir), "--patients", "30", "--time-steps", "8", "--features", features]);
}

fn train(data: &Path, ckpt: &Path, task: &str) {
    ok(&[
        "--seed", "1", "train", "--data", s(data), "--out", s(ckpt), "--task", task, "--epochs", "2", "--time-steps",
        "8", "--removal", "0.1",
    ]);
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    generate(&a, "5", "4");
    generate(&b, "5", "4");
    generate(&c, "6", "4");
    for f in ["observations.csv", "labels.csv", "variables.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        std::fs::read(a.join("observations.csv")).unwrap(),
        std::fs::read(c.join("observations.csv")).unwrap()
    );
}

#[test]
fn train_without_data_is_a_usage_error() {
    let out = vrin(&["train", "--out", "x.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_key_is_reported_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    generate(&data, "1", "3");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 2\nlearning_rat = 0.1\nhidden = -4\n").unwrap();
    let out = vrin(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rat") && err.contains("hidden"), "{err}");
}

#[test]
fn unwritable_output_is_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = vrin(&["generate", "--out", s(&blocker.join("sub")), "--patients", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn imputation_flow_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, other, ckpt) = (dir.path().join("d"), dir.path().join("o"), dir.path().join("m.ckpt"));
    generate(&data, "2", "4");
    generate(&other, "2", "5");
    train(&data, &ckpt, "imputation");
    assert!(dir.path().join("m.ckpt.report.txt").exists());

    let out = vrin(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(2));

    let out = vrin(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&other), "--removal", "0.1"]);
    assert_eq!(out.status.code(), Some(3));

    let out = ok(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data), "--removal", "0.1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mae") && text.contains("mean_fill_mae"), "{text}");

    let out = ok(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data), "--removal", "0.1", "--folds", "2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains(" ± "));

    let imputed = dir.path().join("imputed.csv");
    ok(&["impute", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&imputed)]);
    let rows = std::fs::read_to_string(&imputed).unwrap().lines().count() - 1;
    assert_eq!(rows, 30 * 8 * 4);
}

#[test]
fn classification_predictions_are_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = (dir.path().join("d"), dir.path().join("m.ckpt"));
    generate(&data, "3", "3");
    train(&data, &ckpt, "classification");
    ok(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data)]);
    let (imputed, preds) = (dir.path().join("i.csv"), dir.path().join("p.csv"));
    ok(&["impute", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&imputed), "--predictions", s(&preds)]);
    let mut reader = csv::Reader::from_path(&preds).unwrap();
    let probs: Vec<f64> = reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(probs.len(), 30);
    assert!(probs.iter().all(|p| *p > 0.0 && *p < 1.0));
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = (dir.path().join("d"), dir.path().join("m.ckpt"));
    generate(&data, "4", "3");
    train(&data, &ckpt, "classification");
    let bytes = std::fs::read(&ckpt).unwrap();
    std::fs::write(&ckpt, &bytes[..bytes.len() / 2]).unwrap();
    let out = vrin(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data)]);
    assert!(!out.status.success());
}
