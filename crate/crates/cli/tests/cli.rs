use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nfisac");

const SMALL: &str = r#"{
    "array": {"kind": "uca", "n_t": 16, "n_r": 16},
    "target": {"rho_m": [0.3, 1.0], "phi_deg": [30], "y_m": [0, 0.1]},
    "sweep": {"axis": "n_r", "values": [8, 16]},
    "scenario": {"gamma_min_db": 5},
    "methods": ["isotropic", "closed_form", "vqf", "oracle"],
    "oracle_budget": 2000,
    "seed": 7
}"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("NFISAC_THREADS").output().unwrap()
}

#[test]
fn sweep_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = run(&["sweep", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 4);
    assert!(text.starts_with("axis,value,method,array,n_t,n_r,rho_m,phi_rad,y_m,"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let go = |threads: &str| {
        Command::new(BIN).args(["sweep", cfg.to_str().unwrap()]).env("NFISAC_THREADS", threads).output().unwrap()
    };
    let (one, four) = (go("1"), go("4"));
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(go("0").status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let a = run(&["optimize", cfg.to_str().unwrap(), "--seed", "1"]);
    let b = run(&["optimize", cfg.to_str().unwrap(), "--seed", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(!text.contains(",isotropic,"));
    assert!(text.contains(",oracle,"));
}

#[test]
fn crb_reports_isotropic_rows_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let o = run(&["crb", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.contains(",isotropic,")));
}

#[test]
fn timing_adds_trailing_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let o = run(&["crb", cfg.to_str().unwrap(), "--timing"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",flags,wall_time_ms"));
}

#[test]
fn invalid_config_exits_1_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &SMALL.replace("\"n_t\": 16", "\"n_t\": -2"));
    let o = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("array.n_t"));
    assert_eq!(run(&["sweep", "/nonexistent/c.json"]).status.code(), Some(1));
}

#[test]
fn infeasible_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &SMALL.replace("\"gamma_min_db\": 5", "\"gamma_min_db\": 250"));
    let o = run(&["optimize", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("infeasible"));
}

#[test]
fn validate_filter_runs_subset() {
    let o = run(&["validate", "--filter", "norms"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("norms/coplanar") && text.contains("norms/noncoplanar"));
    assert!(!text.contains("derivatives"));
    assert!(text.ends_with("2 checks, 0 failed\n"));
}

#[test]
fn validate_catches_injected_fault() {
    let ok = run(&["validate", "--filter", "derivatives"]);
    assert!(ok.status.success());
    let bad = run(&["validate", "--filter", "derivatives", "--inject-fault", "range-sign"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("derivatives/steering"));
}

#[test]
fn validate_unknown_filter_fails() {
    assert_eq!(run(&["validate", "--filter", "nothing-matches"]).status.code(), Some(3));
}
