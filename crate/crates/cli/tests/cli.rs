use std::path::Path;
use std::process::{Command, Output};

fn saa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saa")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMOKE: &str = "[mesh]\nn = 8\n[field]\nterms = 10\n[study]\nn_ref = 64\nn_grid = [2, 4]\nreplications = 1\n";

#[test]
fn bound_prints_the_unit_estimate() {
    let out = saa(&["bound", "--r", "1", "--tau", "1", "--L", "1", "--eps", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "12");
}

#[test]
fn bad_covering_is_a_config_error() {
    let out = saa(&["bound", "--r", "1", "--tau", "1", "--L", "1", "--eps", "1", "--covering", "exp:2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = saa(&["--config", path(&dir.path().join("nope.toml")), "--out", path(&out_dir), "solve-nominal"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[mesh]\nn = 8\nrefine = true\n").unwrap();
    let out = saa(&["--config", path(&cfg), "--out", path(&dir.path().join("o")), "solve-nominal"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refine"));
}

#[test]
fn report_on_non_study_directory_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = saa(&["report", path(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_study_smoke_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMOKE).unwrap();
    let out_dir = dir.path().join("study");
    let out = saa(&["--config", path(&cfg), "--out", path(&out_dir), "--threads", "2", "run-study"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["raw.csv", "summary.csv", "rates.csv", "config.toml", "manifest.toml"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let raw = std::fs::read_to_string(out_dir.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 3);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    std::fs::remove_file(out_dir.join("summary.csv")).unwrap();
    let out = saa(&["report", path(&out_dir)]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(out_dir.join("summary.csv")).unwrap(), summary);
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMOKE).unwrap();
    let out_dir = dir.path().join("ref");
    let out = saa(&["--config", path(&cfg), "--out", path(&out_dir), "--seed", "9", "solve-reference"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 9"));
    assert!(out_dir.join("reference_control.svg").is_file());
}
