use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_magscat");

fn magscat(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    for k in ["MAGSCAT_CONFIG", "MAGSCAT_OUT", "MAGSCAT_WORKERS", "MAGSCAT_SEED", "MAGSCAT_EXPERIMENT", "MAGSCAT_SELECT"] {
        if !envs.iter().any(|(e, _)| *e == k) {
            cmd.env_remove(k);
        }
    }
    cmd.output().expect("spawn magscat")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const FREE: &str = r#"{"grid": {"n": 1, "N": 256, "L": 20.0}, "initial": {"k0": [1.0]},
    "dynamics": {"T_scat": 3.0, "dt": 0.01}, "experiment": "free_identity"}"#;

#[test]
fn verify_grid_core_passes() {
    let out = magscat(&["verify", "--select", "grid_core", "--workers", "1"], &[]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn injected_fault_is_caught() {
    let out = magscat(&["verify", "--select", "magnetic_unitarity", "--inject-fault", "flip-divergence"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn empty_selection_is_an_error() {
    let out = magscat(&["verify", "--select", "no_such_check"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verify.select"));
}

#[test]
fn missing_grid_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"dynamics": {"dt": 0.01}}"#);
    let out = magscat(&["scatter", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"grid": {"n": 1, "N": 64, "L": 10.0}, "probes": {"sigmaa": 1.0}}"#);
    let out = magscat(&["probe", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("probes.sigmaa"));
}

#[test]
fn free_identity_scatter_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "free.json", FREE);
    let dir = tmp.path().join("run");
    let out = magscat(&["scatter", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", "5"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "config.json", "scatter/result.json", "scatter/output.bin"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["pass"], true);
}

#[test]
fn environment_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "free.json", FREE);
    let dir = tmp.path().join("env-run");
    let out = magscat(
        &["scatter"],
        &[
            ("MAGSCAT_CONFIG", cfg.as_str()),
            ("MAGSCAT_OUT", dir.to_str().unwrap()),
            ("MAGSCAT_SEED", "9"),
            ("MAGSCAT_WORKERS", "1"),
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
}

#[test]
fn experiment_must_match_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "free.json", FREE);
    let dir = tmp.path().join("x");
    let out = magscat(&["probe", "--config", &cfg, "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
}
