use std::path::Path;
use std::process::{Command, Output};

fn geosyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geosyn")).args(args).output().unwrap()
}

fn synthesize(dir: &Path) {
    let out = geosyn(&["synthesize", "--out", dir.to_str().unwrap(), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_model_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path());
    let d = dir.path().to_str().unwrap();
    let missing = format!("{d}/absent.json");
    let out = geosyn(&["analyze", "--model", &missing, "--trajectory", &format!("{d}/trajectory.csv"), "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(geosyn(&["analyze"]).status.code(), Some(1));
    assert_eq!(geosyn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(geosyn(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path());
    let d = dir.path().to_str().unwrap();
    let (model, traj) = (format!("{d}/model.json"), format!("{d}/trajectory.csv"));
    let out = geosyn(&["analyze", "--model", &model, "--trajectory", &traj, "--out", d, "--delta-theta", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = geosyn(&["reconstruct", "--model", &model, "--trajectory", &traj, "--out", d, "--mode", "spline"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_recovers_the_synthetic_knots() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path());
    let d = dir.path().to_str().unwrap();
    let out = geosyn(&["analyze", "--model", &format!("{d}/model.json"), "--trajectory", &format!("{d}/trajectory.csv"), "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = json(&dir.path().join("truth.json"));
    let segments = json(&dir.path().join("segments.json"));
    assert_eq!(segments["schema_version"], 1);
    let ends: Vec<u64> = segments["riemannian"]["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["end"].as_u64().unwrap())
        .collect();
    let knots: Vec<u64> = truth["knots"].as_array().unwrap().iter().map(|k| k.as_u64().unwrap()).collect();
    assert_eq!(ends, knots[1..]);
    for name in ["velocities.csv", "angles.csv"] {
        assert!(dir.path().join(name).is_file());
    }
}

#[test]
fn reconstruct_and_compare_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    synthesize(dir.path());
    let d = dir.path().to_str().unwrap();
    let (model, traj) = (format!("{d}/model.json"), format!("{d}/trajectory.csv"));
    let out = geosyn(&["reconstruct", "--model", &model, "--trajectory", &traj, "--out", &format!("{d}/r")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("r/reconstruction.json"));
    assert_eq!(doc["mode"], "riemannian");
    assert!(doc["metrics"]["joint_error_rad"].as_f64().unwrap() < 1e-3);

    let out = geosyn(&["compare", "--model", &model, "--trajectory", &traj, "--out", &format!("{d}/c")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert_eq!(table.lines().next().unwrap().split(',').count(), 8);
}
