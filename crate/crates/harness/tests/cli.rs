//! End-to-end checks of the command-line binary: flag handling, exit codes,
//! and output files.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slicesim"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slicesim-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn run_writes_one_row_per_second() {
    let dir = temp_dir("rows");
    let status = bin()
        .args([
            "--mode",
            "oob",
            "--seed",
            "1",
            "--duration-s",
            "2",
            "--out",
            dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.join("oob_seed1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + 2 seconds
    assert!(dir.join("summary.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn multi_seed_static_mode_writes_all_runs_and_summary() {
    let dir = temp_dir("multi");
    let status = bin()
        .args([
            "--mode",
            "static:2",
            "--seed",
            "1,2,3",
            "--duration-s",
            "1",
            "--out",
            dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for seed in 1..=3 {
        assert!(dir.join(format!("static-2_seed{seed}.csv")).exists());
    }
    assert!(dir.join("summary.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bogus_mode_is_usage_error() {
    let out = bin()
        .args(["--mode", "bogus", "--seed", "1", "--duration-s", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown mode"));
}

#[test]
fn missing_flags_are_usage_errors() {
    let out = bin().args(["--mode", "dynamic"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_runtime_error() {
    let out = bin()
        .args([
            "--mode",
            "oob",
            "--seed",
            "1",
            "--duration-s",
            "1",
            "--out",
            "/proc/definitely-not-writable",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_is_runtime_error() {
    let dir = temp_dir("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "rho_0 = 1.5\n").unwrap();
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--mode",
            "oob",
            "--seed",
            "1",
            "--duration-s",
            "1",
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho_0"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn help_prints_usage() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("USAGE"));
}
