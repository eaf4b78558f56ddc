use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampwave")).args(args).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn trace_rows(path: &Path) -> Vec<(f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,v0"));
    lines
        .map(|l| {
            let mut c = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (c.next().unwrap(), c.next().unwrap())
        })
        .collect()
}

#[test]
fn forward_constant_damping() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command": "forward", "profile": {"kind": "constant", "params": {"value": 1.0}}, "T": 2.0, "h": 0.0025}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["forward", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--plot"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = trace_rows(&out.join("trace.csv"));
    let (_, d1) = rows.iter().find(|(t, _)| (*t - 1.0).abs() < 1e-12).unwrap();
    assert!((d1 - 0.0062238).abs() < 5e-7, "{d1}");
    assert!(out.join("plot.gp").exists());
    assert!(out.join("profile.json").exists());
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"profile": {"kind": "gaussian-bump", "params": {"base": 1.0, "amplitude": 0.3, "center": 0.4, "width": 0.05}}, "T": 1.0, "h": 0.01}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(run(&["forward", "--config", &cfg, "--out-dir", d.to_str().unwrap()]).status.success());
    }
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn identity_with_equal_profiles() {
    let dir = TempDir::new().unwrap();
    let p = r#"{"kind": "linear", "params": {"intercept": 1.0, "slope": 0.5}}"#;
    let cfg = write_config(dir.path(), &format!(r#"{{"profile": {p}, "profile2": {p}, "T": 1.0, "h": 0.01}}"#));
    let out = dir.path().join("out");
    let o = run(&["identity", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("breakdown.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sigma,I1,I2,I3,I4,I5,data_term,residual"));
    for l in lines {
        let residual: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual.abs() < 1e-14);
    }
}

#[test]
fn invert_oracle_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command": "invert", "T": 2.0, "data": {"oracle": 1.0},
            "inversion": {"a0": 1.0, "n_layers": 50, "solver_h": 0.0025}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["invert", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["final_misfit"].as_f64().unwrap() <= 1e-6);
    for v in report["profile"]["params"]["values"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-3);
    }
    assert!(fs::read_to_string(out.join("misfit.csv")).unwrap().starts_with("iter,misfit\n"));
}

#[test]
fn invert_from_trace_file() {
    let dir = TempDir::new().unwrap();
    let oracle_cfg = write_config(dir.path(), r#"{"a": 1.0, "T": 1.0, "h": 0.005}"#);
    let data_dir = dir.path().join("data");
    assert!(run(&["oracle", "--config", &oracle_cfg, "--out-dir", data_dir.to_str().unwrap()]).status.success());
    let cfg = write_config(
        dir.path(),
        r#"{"data": "data/trace.csv", "inversion": {"a0": 1.0, "n_layers": 10, "solver_h": 0.01,
            "gn": {"max_iters": 2}}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["invert", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn convergence_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"profile": {"kind": "constant", "params": {"value": 1.0}}, "T": 1.0, "steps": [0.02, 0.01, 0.005]}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["convergence", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,error,order");
    let order: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order > 1.9);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad_grid = write_config(dir.path(), r#"{"profile": {"kind": "constant", "params": {"value": 1.0}}, "T": 1.0, "h": 0.3}"#);
    assert_eq!(run(&["forward", "--config", &bad_grid, "--out-dir", out]).status.code(), Some(2));
    assert_eq!(run(&["forward", "--T", "1", "--h", "0.01", "--out-dir", out]).status.code(), Some(2));
    let wrong = write_config(dir.path(), r#"{"command": "oracle", "a": 1.0, "T": 1.0, "h": 0.01}"#);
    assert_eq!(run(&["forward", "--config", &wrong]).status.code(), Some(2));
    let schema = write_config(dir.path(), r#"{"profile": {"kind": "cosine", "params": {}}, "T": 1.0, "h": 0.01}"#);
    assert_eq!(run(&["forward", "--config", &schema]).status.code(), Some(2));
    assert_eq!(run(&["forward", "--config", "/nonexistent/run.json"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"profile": {"kind": "constant", "params": {"value": 50.0}}, "T": 1.0, "h": 0.05}"#);
    let o = run(&["forward", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step size"));
}

#[test]
fn command_line_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"a": 1.0, "T": 1.0, "h": 0.3}"#);
    let out = dir.path().join("out");
    let o = run(&["oracle", "--config", &cfg, "--h", "0.01", "--T", "2", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = trace_rows(&out.join("trace.csv"));
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[100].0, 2.0);
}
