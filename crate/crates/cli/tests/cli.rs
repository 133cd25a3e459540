use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use qsl_cli::config::{CommandKind, Params, RunConfig};
use qsl_cli::error::ConfigError;
use qsl_cli::fit::{fit_convergence, FitError, FitModel, FitRow, MIN_ROWS};

fn qsl(dir: &Path, args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsl")).current_dir(dir).env("QSL_WORKERS", workers).args(args).output().unwrap()
}

fn manifest(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn exponential_fit_recovers_exact_law() {
    let t_c = 2.0;
    let rows: Vec<FitRow> = (5..=30).map(|n| FitRow { n: n as f64, t_f: t_c + (0.3 - 0.4 * n as f64).exp(), converged: true }).collect();
    let f = fit_convergence(&rows, t_c, FitModel::Exponential).unwrap();
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!((f.slope + 0.4).abs() < 1e-12 && (f.intercept - 0.3).abs() < 1e-10);
    let p = fit_convergence(&rows, t_c, FitModel::Polynomial).unwrap();
    assert!(p.r_squared < f.r_squared);
}

#[test]
fn polynomial_fit_recovers_power_law() {
    let rows: Vec<FitRow> = (5..=50).map(|n| FitRow { n: n as f64, t_f: 1.0 + 0.7 / (n * n) as f64, converged: true }).collect();
    let f = fit_convergence(&rows, 1.0, FitModel::Polynomial).unwrap();
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!((f.slope + 2.0).abs() < 1e-10);
}

#[test]
fn fit_ignores_unusable_rows() {
    let mut rows: Vec<FitRow> = (1..=4).map(|n| FitRow { n: n as f64, t_f: 1.0 + 1.0 / n as f64, converged: true }).collect();
    rows.push(FitRow { n: 5.0, t_f: 1.1, converged: false });
    rows.push(FitRow { n: 6.0, t_f: 0.9, converged: true });
    assert_eq!(fit_convergence(&rows, 1.0, FitModel::Exponential), Err(FitError::InsufficientData { needed: MIN_ROWS, got: 4 }));
}

#[test]
fn config_file_errors_carry_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"n\": 3,\n  \"mode\": \"sideways\"\n}\n").unwrap();
    let flags = Params { config: Some(path.clone()), ..Params::default() };
    match RunConfig::resolve(CommandKind::TwoControl, flags) {
        Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let out = qsl(dir.path(), &["two-control", "--config", path.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json:3:"));
}

#[test]
fn unknown_and_unused_fields_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{ "n": 3, "colour": 1 }"#).unwrap();
    let out = qsl(dir.path(), &["two-control", "--config", path.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let flags = Params { detuning: Some(0.5), ..Params::default() };
    match RunConfig::resolve(CommandKind::TwoControl, flags) {
        Err(ConfigError::Field { field, .. }) => assert_eq!(field, "detuning"),
        other => panic!("{other:?}"),
    }
    let out = qsl(dir.path(), &["linear", "--omega=-1"], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega"));
    let out = qsl(dir.path(), &["two-control", "--mode", "free-tail"], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("period"));
    let out = qsl(dir.path(), &["two-control", "--bogus"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{ "n": 7, "omega": 0.25 }"#).unwrap();
    let flags = Params { config: Some(path), n: Some(9), ..Params::default() };
    let cfg = RunConfig::resolve(CommandKind::Linear, flags).unwrap();
    assert_eq!(cfg.params.n, Some(9));
    assert_eq!(cfg.params.omega, Some(0.25));
    assert_eq!(cfg.output_path(), Path::new("linear.csv"));
}

#[test]
fn output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |w: &str, name: &str| {
        let out = qsl(dir.path(), &["two-control", "--n", "4", "--out", name], w);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("4", "b.csv"));
    let sweep = |w: &str, name: &str| {
        let out = qsl(dir.path(), &["sweep", "--n-min", "3", "--n-max", "8", "--out", name], w);
        assert_eq!(out.status.code(), Some(0));
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(sweep("1", "s1.csv"), sweep("3", "s3.csv"));
}

#[test]
fn manifest_records_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsl(dir.path(), &["two-control", "--n", "3", "--out", "res/tc.json", "--format", "json"], "2");
    assert_eq!(out.status.code(), Some(0));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert!(printed.contains("tc.json.manifest.json"));
    let m = manifest(&dir.path().join("res/tc.json.manifest.json"));
    assert_eq!(m["command"], "two-control");
    assert_eq!(m["config"]["params"]["n"], 3);
    assert_eq!(m["success"], true);
    assert_eq!(m["row_status"].as_array().unwrap().len(), 3);
    assert!(m["versions"]["qsl-core"].is_string() && m["versions"]["qsl-cli"].is_string());
    assert!(m["failures"].as_array().unwrap().is_empty());
    let t_f = m["summary"]["t_f"].as_f64().unwrap();
    assert!((t_f - 2.75292).abs() < 5e-4);
    let table: Value = serde_json::from_slice(&fs::read(dir.path().join("res/tc.json")).unwrap()).unwrap();
    assert_eq!(table["columns"][0], "k");
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsl(dir.path(), &["linear", "--n", "4"], "1");
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("linear.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,phase,re_z,im_z"));
    let last = text.lines().last().unwrap();
    let cells: Vec<f64> = last.split(',').skip(2).map(|c| c.parse().unwrap()).collect();
    assert!((cells[0] - 1.0).abs() < 1e-12 && cells[1].abs() < 1e-12);
    let m = manifest(&dir.path().join("linear.csv.manifest.json"));
    assert!((m["summary"]["t_f"].as_f64().unwrap() - 1.000_652_188_7).abs() < 1e-9);
}

#[test]
fn nmr_reports_microseconds() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsl(dir.path(), &["nmr", "--nu", "100e3", "--n", "9"], "2");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("nmr.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("case,N,T,t_f,time_us"));
    let m = manifest(&dir.path().join("nmr.csv.manifest.json"));
    assert_eq!(m["summary"]["n"], 9);
    assert!((m["summary"]["continuous_us"].as_f64().unwrap() - 4.33).abs() < 0.01);
}

#[test]
fn nmr_flags_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsl(dir.path(), &["nmr", "--n", "12"], "1");
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&dir.path().join("nmr.csv.manifest.json"));
    assert_eq!(m["success"], false);
    assert!(m["failures"][0].as_str().unwrap().contains("expected 12"));
}

#[test]
fn adjoint_map_writes_curve_and_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsl(dir.path(), &["adjoint-map", "--grid", "20", "--curve-samples", "10", "--out", "map.csv"], "2");
    assert_eq!(out.status.code(), Some(0));
    let curve = fs::read_to_string(dir.path().join("map.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 21);
    assert!(dir.path().join("map.zeros.csv").exists());
    assert_eq!(fs::read_to_string(dir.path().join("map.csv")).unwrap().lines().count(), 401);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qsl(dir.path(), &["--help"], "1").status.code(), Some(0));
    assert_eq!(qsl(dir.path(), &["--version"], "1").status.code(), Some(0));
    assert_eq!(qsl(dir.path(), &[], "1").status.code(), Some(2));
}
