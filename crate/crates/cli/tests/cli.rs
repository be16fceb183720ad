use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn psynth(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_psynth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("PSYNTH_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SIM: &str = r#"{"seed": 3, "output_dir": "sim",
  "simulate": {"n": 150, "keys": [{"name": "gender", "levels": 2}, {"name": "age", "levels": 3}],
               "sensitive": {"name": "county", "levels": 6}, "classes": 2, "concentration": 1.0}}"#;

const RUN: &str = r#"{"seed": 8, "input": "sim/data.csv", "schema": "sim/schema.json",
  "output_dir": "run", "m": 2, "dpmpm": {"iterations": 60, "burn_in": 30, "k": 5},
  "dp_areal": {"iterations": 60, "burn_in": 30, "k": 5}, "bounds": {"S": 4}}"#;

fn simulated(dir: &Path) -> String {
    let sim = write(dir, "sim.json", SIM);
    let out = psynth(&["simulate", "--config", &sim]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    write(dir, "run.json", RUN)
}

#[test]
fn full_pipeline_exits_zero_and_fills_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path());
    for cmd in ["synthesize", "audit", "bounds"] {
        let out = psynth(&[cmd, "--config", &run, "--jobs", "2"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["synthesize"]["replicate_files"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["audit"]["known_cases"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["bounds"]["S"], 4);
    assert_eq!(manifest["input"], "data.csv");
    for f in ["audit/risk.json", "bounds/min_iterations.csv", "bounds/max_histograms.csv"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
}

#[test]
fn dp_areal_dispatch_writes_m_files() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let areal = write(dir.path(), "areal.json", &RUN.replace("\"m\": 2", "\"m\": 3, \"synthesizer\": \"dp-areal\""));
    let out = psynth(&["synthesize", "--config", &areal]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reps = std::fs::read_dir(dir.path().join("run/replicates")).unwrap().count();
    assert_eq!(reps, 3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    psynth(&["synthesize", "--config", &run, "--out", a.to_str().unwrap()]);
    let out = psynth(&["synthesize", "--config", &run, "--out", b.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success());
    let m: Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["settings"]["seed"], 9);
    let ra = std::fs::read_to_string(a.join("replicates/replicate_01.csv")).unwrap();
    let rb = std::fs::read_to_string(b.join("replicates/replicate_01.csv")).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn env_var_redirects_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path());
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_psynth"))
        .args(["bounds", "--config", &run])
        .env("PSYNTH_OUT_DIR", &target)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("bounds/max.json").is_file());
    assert!(!dir.path().join("run").exists());
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let run = simulated(dir.path());

    let missing = psynth(&["audit", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let no_seed = write(dir.path(), "noseed.json", r#"{"input": "sim/data.csv"}"#);
    assert_eq!(psynth(&["bounds", "--config", &no_seed]).status.code(), Some(1));

    let lkj = write(
        dir.path(),
        "lkj.json",
        &RUN.replace("\"m\": 2", "\"m\": 2, \"synthesizer\": \"dp-areal\"")
            .replace("\"k\": 5}, \"bounds\"", "\"k\": 5, \"covariance_mode\": \"full-lkj\"}, \"bounds\""),
    );
    assert_eq!(psynth(&["synthesize", "--config", &lkj]).status.code(), Some(1));

    write(dir.path(), "bad.csv", "gender,age,county\n1,1,7\n");
    let bad = write(dir.path(), "bad.json", &RUN.replace("sim/data.csv", "bad.csv"));
    assert_eq!(psynth(&["bounds", "--config", &bad]).status.code(), Some(2));

    // audit without a bundle is a configuration problem
    assert_eq!(psynth(&["audit", "--config", &run]).status.code(), Some(1));
    assert_eq!(psynth(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(psynth(&["bounds", "--config", &run, "--jobs", "0"]).status.code(), Some(1));
}
