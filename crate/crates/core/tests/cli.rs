use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slowfast"))
}

fn example() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example.toml").to_string()
}

#[test]
fn resonance_for_k0_zero_is_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().args(["resonance", "--k0", "0", "--out"]).arg(dir.path()).status().unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(dir.path().join("resonance.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let eps: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert_eq!(eps, 0.5);
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn failures_report_a_category() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema = 7\n").unwrap();
    let out = bin().arg("--config").arg(&bad).arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]"));
}

fn compare_bytes(dir: &Path, jobs: &str) -> Vec<u8> {
    let st = bin()
        .args(["--config", &example(), "--jobs", jobs, "compare", "--epsilon", "1e-3,1e-2", "--k0", "1,2", "--samples", "2", "--out"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(st.success());
    std::fs::read(dir.join("compare.csv")).unwrap()
}

#[test]
fn compare_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(compare_bytes(a.path(), "1"), compare_bytes(b.path(), "2"));
    let m1 = std::fs::read_to_string(a.path().join("manifest.toml")).unwrap();
    let m2 = std::fs::read_to_string(b.path().join("manifest.toml")).unwrap();
    assert_eq!(m1, m2);
    assert!(m1.contains("config_sha256"));
}

#[test]
fn simulate_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["--config", &example(), "simulate", "--t-end", "0.05", "--variant", "reduced-slow", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,component,k,re,im"));
}

#[test]
fn verify_runs_a_selected_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["--config", &example(), "verify", "--check", "4", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS [4]"));
}

#[test]
fn gate_refusal_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--config", &example(), "manifold", "--kind", "galerkin-lp", "--epsilon", "0.01", "--k0", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[timescale_order_violated]"));
}
