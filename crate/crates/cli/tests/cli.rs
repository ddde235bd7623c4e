use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoqutrit")).args(args).current_dir(dir).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gate_x_pi_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gate", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("g/report.json"));
    assert_eq!(report["gate"], "X_pi");
    assert!(report["fidelity"].as_f64().unwrap() > 1.0 - 1e-6);
    assert!((report["duration_ns"].as_f64().unwrap() - 120.0).abs() < 1e-9);
    let manifest = json(&dir.path().join("g/manifest.json"));
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["subcommand"], "gate");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(dir.path().join("g/schedule.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn sweep_is_identical_across_reruns_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.json"),
        r#"{"version": 1, "gate": {"name": "H"},
            "sweep": {"epsilon": {"min": -0.1, "max": 0.1, "points": 3},
                      "detuning_mhz": {"min": -1, "max": 1, "points": 4}, "steps": 256}}"#,
    )
    .unwrap();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = run(&["sweep", "--config", "s.json", "--out", name, "--threads", threads], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["sweep_att.csv", "sweep_unatt.csv", "sweep.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        for other in ["b", "c"] {
            assert_eq!(a, fs::read(dir.path().join(other).join(file)).unwrap(), "{file} differs in {other}");
        }
    }
    let side = json(&dir.path().join("a/sweep.json"));
    assert_eq!(side["settings_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_errors_exit_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"version": 1, "envelope": {"sigma_ns": 30, "totl_ns": 120}}"#).unwrap();
    let out = run(&["gate", "--config", "bad.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("envelope"), "{err}");
    assert!(err.contains("totl_ns"), "{err}");

    fs::write(dir.path().join("v.json"), r#"{"version": 7}"#).unwrap();
    let out = run(&["gate", "--config", "v.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`version`"));
}

#[test]
fn missing_input_leaves_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"version": 1, "calibrate": {"kind": "rabi", "files": ["nope.csv"]}}"#)
        .unwrap();
    let out = run(&["calibrate", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let manifest = json(&dir.path().join("o/manifest.json"));
    assert_eq!(manifest["status"], "incomplete");
    assert!(manifest["error"].as_str().unwrap().contains("nope.csv"));
}

#[test]
fn rb_summary_reports_average_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("r.json"),
        r#"{"version": 1, "steps": 512, "noise": {"preset": "paper-device"},
            "rb": {"lengths": [1, 2, 4, 8, 16, 32], "randomizations": 10, "interleaved": "X_pi"}}"#,
    )
    .unwrap();
    let out = run(&["rb", "--config", "r.json", "--out", "o", "--seed", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("o/summary.json"));
    let f = s["F_avg"].as_f64().unwrap();
    assert!(f > 0.98 && f < 1.0, "{f}");
    assert!(s["F_gate"].as_f64().is_some());
    let csv = fs::read_to_string(dir.path().join("o/rb_reference.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(dir.path().join("o/rb_interleaved.csv").exists());
}

#[test]
fn qpt_with_shots_records_sampling() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("q.json"), r#"{"version": 1, "gate": {"name": "H"}}"#).unwrap();
    let out = run(&["qpt", "--config", "q.json", "--out", "o", "--shots", "5000", "--seed", "9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = json(&dir.path().join("o/record.json"));
    assert_eq!(rec["shots"], 5000);
    assert_eq!(rec["seed"], 9);
    let s = json(&dir.path().join("o/summary.json"));
    assert!(s["f_att"].as_f64().unwrap() > 0.97);
    let chi = fs::read_to_string(dir.path().join("o/chi_full.csv")).unwrap();
    assert!(chi.lines().count() >= 9);
}

#[test]
fn calibrate_chevron_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("detuning_mhz,rabi_mhz\n");
    for i in 0..41 {
        let d = -4.0 + 0.2 * i as f64;
        csv.push_str(&format!("{d},{}\n", ((d - 0.3f64).powi(2) + 4.0 * 0.8f64.powi(2)).sqrt()));
    }
    fs::create_dir(dir.path().join("data")).unwrap();
    fs::write(dir.path().join("data/chev.csv"), csv).unwrap();
    fs::write(
        dir.path().join("data/c.json"),
        r#"{"version": 1, "calibrate": {"kind": "chevron", "files": ["chev.csv"]}}"#,
    )
    .unwrap();
    let out = run(&["calibrate", "--config", "data/c.json", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = json(&dir.path().join("o/fit.json"));
    assert!((fit["center_mhz"].as_f64().unwrap() - 0.3).abs() < 1e-6);
    assert!((fit["coupling_mhz"].as_f64().unwrap() - 0.8).abs() < 1e-6);
    assert!(fit["fit"]["stats"]["covariance"].is_array());
}

#[test]
fn cavity_identity_is_lossless_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"version": 1, "cavity": {"gate": "identity", "decoherence": false}}"#)
        .unwrap();
    let out = run(&["cavity", "--config", "c.json", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("o/summary.json"));
    assert!(s["gated"]["f_att"].as_f64().unwrap() > 1.0 - 1e-6);
    assert!(dir.path().join("o/chi.csv").exists());
}
