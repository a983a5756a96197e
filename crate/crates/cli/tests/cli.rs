use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    out: PathBuf,
}

fn tpdo(dir: &TempDir, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.path().join(format!("{cmd}-{}.json", extra.join("_").replace(['-', '/'], "")));
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join(format!("out-{cmd}-{}", fs::read_dir(dir.path()).unwrap().count()));
    let o = Command::new(env!("CARGO_BIN_EXE_tpdo"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: o.status.code().unwrap(),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
        out,
    }
}

fn report(out: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join(name)).unwrap()).unwrap()
}

#[test]
fn taylor_cubic_preset_passes() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "taylor", r#"{"preset": "cubic", "seed": 3}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = report(&r.out, "summary.json");
    assert_eq!(s["trials"], 200);
    assert_eq!(s["bound_failures"], 0);
    assert!(s["exact_checks"].as_u64().unwrap() > 0);
    let csv = fs::read_to_string(r.out.join("taylor.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn taylor_accepts_non_polynomial_data() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "taylor", r#"{"preset": "wave modes=4", "trials": 60, "n": 2}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report(&r.out, "summary.json")["exact_checks"], 0);
}

#[test]
fn malformed_and_unknown_configs_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(tpdo(&dir, "taylor", r#"{"preset": "cubic""#, &[]).code, 2);
    assert_eq!(tpdo(&dir, "taylor", r#"{"preset": "cubic", "trails": 3}"#, &[]).code, 2);
    assert_eq!(tpdo(&dir, "taylor", r#"{"preset": "quartic"}"#, &[]).code, 2);
    assert_eq!(tpdo(&dir, "l2bound", r#"[1, 2]"#, &[]).code, 2);
    assert_eq!(tpdo(&dir, "solve", r#"{"N": "many"}"#, &[]).code, 2);
    assert_eq!(tpdo(&dir, "compose", r#"{"preset": "tp", "phase": "linear"}"#, &[]).code, 2);
    let missing = Command::new(env!("CARGO_BIN_EXE_tpdo")).args(["extend"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let nofile = Command::new(env!("CARGO_BIN_EXE_tpdo")).args(["extend", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(nofile.status.code(), Some(2));
}

#[test]
fn extend_presets() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "extend", r#"{"preset": "bracket m=1", "radius": 12}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(report(&r.out, "report.json")["restriction_error"].as_f64().unwrap() < 1e-8);

    let r = tpdo(&dir, "extend", r#"{"preset": "const"}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&r.out, "report.json");
    assert!(rep["constant_defect"].as_f64().unwrap() < 1e-8);
    assert!(rep["poisson_defect"].as_f64().unwrap() < 1e-8);

    let r = tpdo(&dir, "extend", r#"{"radius": 12}"#, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("preset"));
}

#[test]
fn l2bound_multiplier_and_random_tables() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "l2bound", r#"{"preset": "bracket m=-1"}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let case = &report(&r.out, "report.json")["cases"][0];
    assert!((case["bound"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((case["norm"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(case["multiplier"], true);

    let r = tpdo(&dir, "l2bound", r#"{"random_tables": 5, "N": 16, "K": 8}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(fs::read_to_string(r.out.join("l2bound.csv")).unwrap().lines().count(), 6);
}

#[test]
fn compose_workflows() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "compose", r#"{"preset": "tp-trivial", "N": 16, "K": 4}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(report(&r.out, "report.json")["trivial_gap"].as_f64().unwrap() <= 1e-12);

    let r = tpdo(&dir, "compose", r#"{"preset": "tp", "N": 32, "K": 8, "write_tables": true}"#, &[]);
    assert!(r.out.join("amplitude_M2.json").exists() && r.out.join("amplitude_direct.json").exists());
    let rows = &report(&r.out, "report.json")["rows"];
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert_eq!(r.code, if report(&r.out, "report.json")["monotone"] == true { 0 } else { 1 });
}

#[test]
fn solve_transport_is_a_shift() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "solve", r#"{"preset": "transport"}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&r.out, "report.json");
    assert!(rep["transport_error"].as_f64().unwrap() < 1e-10);
    let norms = fs::read_to_string(r.out.join("norms.csv")).unwrap();
    assert!(norms.starts_with("t,l2norm\n"));
    assert_eq!(norms.lines().count(), 1 + 5);
}

#[test]
fn solve_from_compact_euclidean_data() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"initial": "gaussian s=0.3 r=pi", "a1": "bracket", "a0": "cutoff-bracket p=2 r=pi",
                  "t_final": 0.5, "dt": 0.0078125, "schedule": {"kind": "geometric", "first": 0.125, "ratio": 2}}"#;
    let r = tpdo(&dir, "solve", cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report(&r.out, "report.json")["norm_drift"], Value::Null);
    let r = tpdo(&dir, "solve", r#"{"initial": "gaussian s=0.3 r=4", "a1": "norm"}"#, &[]);
    assert_eq!(r.code, 2, "{}", r.stdout);
}

#[test]
fn unstable_step_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(tpdo(&dir, "solve", r#"{"preset": "wave", "dt": 1.0}"#, &[]).code, 2);
}

#[test]
fn periodise_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let r = tpdo(&dir, "periodise", r#"{"symbols": ["const", "derivative", "var-bracket"]}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&r.out, "report.json");
    assert!(rep["spectrum_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(rep["commutation"].as_array().unwrap().len(), 3);
    assert_eq!(tpdo(&dir, "periodise", r#"{"symbols": ["cutoff-lorentz"]}"#, &[]).code, 2);
}

#[test]
fn seed_and_threads_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"preset": "cubic", "trials": 30, "seed": 1}"#;
    let a = tpdo(&dir, "taylor", cfg, &["--threads", "1"]);
    let b = tpdo(&dir, "taylor", cfg, &["--threads", "3"]);
    let c = tpdo(&dir, "taylor", cfg, &["--seed", "2"]);
    let read = |r: &Run| fs::read(r.out.join("taylor.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(report(&c.out, "summary.json")["seed"], 2);
}
