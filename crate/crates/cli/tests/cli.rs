use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SMALL_HARMONIC: &str = r#"{
    "symbol": {"name": "harmonic", "params": {}},
    "window": {"e1": 0.2, "e2": 0.8, "margin": 0.05},
    "hbars": [0.1],
    "pipeline": ["spectrum"],
    "tolerances": {"trace_tol": 1e-10, "oracle_tol": 1e-5, "action_samples": 33},
    "seed": 3
}"#;

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn ebk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebk")).args(args).output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_accepts_the_shipped_configs() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let out = ebk(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &SMALL_HARMONIC.replace("\"seed\"", "\"sed\""));
    let out_dir = dir.path().join("out");
    let validate = ebk(&["validate", "--config", &cfg]);
    let run = ebk(&["run", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    for out in [validate, run] {
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("sed"));
    }
    assert!(!out_dir.exists());
}

#[test]
fn malformed_json_reports_its_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "{\"symbol\": ");
    let out = ebk(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn run_records_inserted_stages_and_file_hashes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL_HARMONIC);
    let out_dir = dir.path().join("out");
    let out = ebk(&["run", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let m = manifest(&out_dir);
    assert_eq!(m["auto_inserted"], serde_json::json!(["trace", "actions"]));
    assert_eq!(m["exit_code"], 0);
    let files = m["files"].as_object().unwrap();
    for name in ["components.csv", "actions.csv", "spectrum.csv"] {
        let bytes = fs::read(out_dir.join(name)).unwrap();
        assert_eq!(files[name], hex::encode(Sha256::digest(&bytes)), "{name}");
    }
    for stage in m["stages"].as_array().unwrap() {
        assert_eq!(stage["status"], "ok");
        assert!(stage["wall_time_s"].as_f64().unwrap() >= 0.0);
    }

    let spectrum = fs::read_to_string(out_dir.join("spectrum.csv")).unwrap();
    let first = spectrum.lines().nth(1).unwrap();
    let energy = first.split(',').nth(3).unwrap();
    assert_eq!(energy.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
    let e: f64 = energy.parse().unwrap();
    assert!((e - 0.25).abs() < 1e-10);
}

#[test]
fn window_across_the_barrier_is_a_hypothesis_violation() {
    let dir = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/double_well_barrier.json");
    let out_dir = dir.path().join("out");
    let out = ebk(&["run", "--config", cfg.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let m = manifest(&out_dir);
    assert_eq!(m["exit_code"], 3);
    let trace = &m["stages"][0];
    assert_eq!(trace["status"], "failed");
    let skipped = m["stages"].as_array().unwrap()[1..].iter().all(|s| s["status"] == "skipped");
    assert!(skipped);
}
