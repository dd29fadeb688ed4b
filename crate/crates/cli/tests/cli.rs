use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn anyonrng(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyonrng"))
        .args(args)
        .current_dir(dir)
        .env_remove("ANYONRNG_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = anyonrng(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

/// Small deduplicated f-curve shared by several tests.
fn fcurve(dir: &Path) -> String {
    ok(dir, &["fcurve", "--grid", "11", "--dedup", "--out", "f.json"]);
    "f.json".into()
}

#[test]
fn simulate_noiseless_reaches_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["simulate", "--trials", "2000", "--seed", "4", "--out", "rec.csv"]);
    let v = stdout_json(&out);
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["command"], "simulate");
    assert_eq!(v["config"]["trials"], 2000);
    assert_eq!(v["result"]["estimate"]["l_hat"], 4.0);
    let csv = fs::read_to_string(dir.path().join("rec.csv")).unwrap();
    assert!(csv.starts_with("trial,x,y,z,a,b,c\n"));
    assert_eq!(csv.lines().count(), 2001);
    assert!(!csv.contains('\r'));
    assert!(dir.path().join("rec.csv.meta.json").exists());
}

#[test]
fn simulate_with_noise_drops_below_four() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&ok(dir.path(), &["simulate", "--trials", "2000", "--noise-p", "0.2"]));
    assert!(v["result"]["estimate"]["l_hat"].as_f64().unwrap() < 4.0);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(anyonrng(dir.path(), &["simulate", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(anyonrng(dir.path(), &["simulate"]).status.code(), Some(2));
    assert_eq!(anyonrng(dir.path(), &["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(anyonrng(dir.path(), &["fcurve", "--level", "7"]).status.code(), Some(2));
    assert_eq!(anyonrng(dir.path(), &["fcurve", "--level", "1", "--grid", "3"]).status.code(), Some(2));
    let out = anyonrng(dir.path(), &["certify", "--records", "missing.csv", "--fcurve", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fcurve_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fcurve", "--grid", "6", "--dedup", "--format", "csv", "--out", "a.csv"]);
    ok(dir.path(), &["fcurve", "--grid", "6", "--dedup", "--format", "csv", "--out", "b.csv"]);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(String::from_utf8(a).unwrap().starts_with("L,f\n"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["level"], "1+ab");
}

#[test]
fn certify_records_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let f = fcurve(dir.path());
    ok(dir.path(), &["simulate", "--trials", "20000", "--out", "rec.csv"]);
    let v = stdout_json(&ok(dir.path(), &["certify", "--records", "rec.csv", "--fcurve", &f]));
    let cert = &v["result"];
    assert_eq!(cert["estimate"]["l_hat"], 4.0);
    assert_eq!(cert["l_m"], 3.9);
    assert!(cert["bound_bits"].as_f64().unwrap() > 0.0);
    assert_eq!(v["config"]["delta"], 0.001);
}

#[test]
fn certify_at_classical_value_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = fcurve(dir.path());
    // Uniform weights: (1/4)·4·(1 + 1 + 1 − 1) = 2.
    fs::write(
        dir.path().join("rec.csv"),
        "trial,x,y,z,a,b,c\n0,0,0,0,0,0,0\n1,0,1,1,1,0,0\n2,1,0,1,0,1,0\n3,1,1,0,0,0,0\n",
    )
    .unwrap();
    let v = stdout_json(&ok(dir.path(), &["certify", "--records", "rec.csv", "--fcurve", &f]));
    assert_eq!(v["result"]["estimate"]["l_hat"], 2.0);
    assert_eq!(v["result"]["bound_bits"], 0.0);
}

#[test]
fn corrupt_records_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let f = fcurve(dir.path());
    fs::write(dir.path().join("rec.csv"), "trial,x,y,z,a,b,c\n0,0,0,1,0,0,0\n").unwrap();
    let out = anyonrng(dir.path(), &["certify", "--records", "rec.csv", "--fcurve", &f]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), r#"{"trials": 500, "seed": 9, "noise_p": 0.3}"#).unwrap();
    let v = stdout_json(&ok(dir.path(), &["simulate", "--config", "run.json", "--trials", "300"]));
    assert_eq!(v["config"]["trials"], 300);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["result"]["estimate"]["k"], 300);
    fs::write(dir.path().join("bad.json"), r#"{"trails": 5}"#).unwrap();
    assert_eq!(anyonrng(dir.path(), &["simulate", "--config", "bad.json"]).status.code(), Some(2));
}

#[test]
fn expand_reports_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let f = fcurve(dir.path());
    let out = ok(dir.path(), &["expand", "--fcurve", &f, "--k-points", "9", "--format", "json"]);
    let v = stdout_json(&out);
    assert!(v["result"]["crossing"].as_u64().is_some());
    let pts = v["result"]["points"].as_array().unwrap();
    assert_eq!(pts[0]["k"], 1000);
    assert!(pts[0]["net_bits"].as_f64().unwrap() < 0.0);
    let csv = ok(dir.path(), &["expand", "--fcurve", &f, "--k-points", "5"]);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("k,bound_bits,input_bits,net_bits\n"));
    assert_eq!(anyonrng(dir.path(), &["expand", "--fcurve", &f, "--alpha", "0"]).status.code(), Some(2));
}

#[test]
fn extract_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let f = fcurve(dir.path());
    ok(dir.path(), &["simulate", "--trials", "5000", "--out", "rec.csv"]);
    let v = stdout_json(&ok(
        dir.path(),
        &["extract", "--records", "rec.csv", "--fcurve", &f, "--binary-out", "bits.bin"],
    ));
    let r = &v["result"];
    let bound = r["certificate"]["bound_bits"].as_f64().unwrap();
    let m = r["output_bits"].as_u64().unwrap();
    assert_eq!(m, (bound - 128.0).floor().max(0.0) as u64);
    assert!(m > 0);
    assert_eq!(r["input_bits"], 15000);
    assert_eq!(fs::read(dir.path().join("bits.bin")).unwrap().len() as u64, m.div_ceil(8));
    assert_eq!(r["output_hex"].as_str().unwrap().len() as u64, 2 * m.div_ceil(8));

    fs::write(dir.path().join("seed.hex"), "abcd").unwrap();
    let out = anyonrng(dir.path(), &["extract", "--records", "rec.csv", "--fcurve", &f, "--seed-file", "seed.hex"]);
    assert_eq!(out.status.code(), Some(2));

    let n = 15000u64;
    let seed_hex = "a5".repeat((n + m - 1).div_ceil(8) as usize);
    fs::write(dir.path().join("seed.hex"), &seed_hex).unwrap();
    let a = ok(dir.path(), &["extract", "--records", "rec.csv", "--fcurve", &f, "--seed-file", "seed.hex"]);
    let b = ok(dir.path(), &["extract", "--records", "rec.csv", "--fcurve", &f, "--seed-file", "seed.hex"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn extract_with_no_entropy_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let f = fcurve(dir.path());
    ok(dir.path(), &["simulate", "--trials", "50", "--out", "rec.csv"]);
    let out = ok(dir.path(), &["extract", "--records", "rec.csv", "--fcurve", &f]);
    let v = stdout_json(&out);
    assert_eq!(v["result"]["output_bits"], 0);
    assert_eq!(v["result"]["output_hex"], "");
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn validate_passes_and_threads_env_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["validate", "--trials", "2000"]);
    assert!(stdout_json(&out)["result"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    let bad = Command::new(env!("CARGO_BIN_EXE_anyonrng"))
        .args(["validate", "--trials", "100"])
        .current_dir(dir.path())
        .env("ANYONRNG_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    ok(dir.path(), &["validate", "--trials", "100", "--threads", "2"]);
}
