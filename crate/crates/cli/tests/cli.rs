use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn config(shape: &str, n: usize, extra: &str) -> String {
    format!(
        r#"{{
  "domain": {{"x1_min": -1, "x1_max": 1, "x2_min": -1, "x2_max": 1}},
  "shape": {shape},
  "grid": {{"nx": {n}, "ny": {n}}},
  "physics": {{"force": 1, "eta0": 0.5, "eta1": 0.2}},
  "solver": {{"omega": 1.7, "tol": 1e-10}}{extra}
}}"#
    )
}

fn run(dir: &Path, cfg: &str, args: &[&str]) -> Output {
    let path = dir.join("run.json");
    fs::write(&path, cfg).unwrap();
    Command::new(env!("CARGO_BIN_EXE_slider"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const LINE: &str = r#"{"kind": "line_contact", "alpha": 2}"#;

#[test]
fn steady_on_flat_slider_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &config(r#"{"kind": "flat"}"#, 9, ""), &["steady"]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["reason"], "no stationary solution for flat slider");
    let file: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/steady.json")).unwrap())
            .unwrap();
    assert_eq!(file, v);
}

#[test]
fn steady_on_line_contact() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &config(LINE, 21, ""), &["steady"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["g_at_root"].as_f64().unwrap().abs() <= 1e-6);
    let (lo, hi) = (v["bracket"][0].as_f64().unwrap(), v["bracket"][1].as_f64().unwrap());
    let beta = v["beta"].as_f64().unwrap();
    assert!(lo < beta && beta < hi);
}

#[test]
fn simulate_writes_monotone_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#",
  "integrator": {"t_end": 2.0}"#;
    let out = run(dir.path(), &config(LINE, 15, extra), &["simulate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,eta,eta_dot,G,load,E1,E2,psor_iters"));
    let ts: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(ts.len() > 2);
    assert_eq!(ts[0], 0.0);
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert!((ts.last().unwrap() - 2.0).abs() < 1e-12);
    assert!(!csv.contains('\r'));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["bounds_hold"], true);
    assert_eq!(v["energy"]["passed"], true);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#",
  "integrator": {"t_end": 1.0},
  "gcurve": {"betas": [2, 1, 0.5, 0.1]}"#;
    let cfg = config(LINE, 11, extra);
    let mut first = Vec::new();
    for round in 0..2 {
        let mut files = Vec::new();
        for cmd in ["simulate", "gcurve", "bounds"] {
            let out = run(dir.path(), &cfg, &[cmd]);
            assert_eq!(out.status.code(), Some(0));
            files.push(out.stdout);
        }
        for name in ["trajectory.csv", "gcurve.csv", "bounds.json", "simulate.json", "config.json"] {
            files.push(fs::read(dir.path().join("out").join(name)).unwrap());
        }
        if round == 0 {
            first = files;
        } else {
            assert_eq!(first, files);
        }
    }
}

#[test]
fn gcurve_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#",
  "gcurve": {"betas": [4, 0.01]}"#;
    let out = run(dir.path(), &config(LINE, 11, extra), &["gcurve"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/gcurve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "beta,g,load,active_fraction,psor_iters,resolved");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4.0,-"));
    assert!(lines[1].ends_with(",true"));
    assert!(lines[2].ends_with(",false"));
}

#[test]
fn bounds_report_contents() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &config(r#"{"kind": "point_contact", "alpha": 2}"#, 9, ""), &["bounds"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["s1"], 0.5);
    assert_eq!(v["s2"], 0.0);
    assert_eq!(v["steady_admissible"], true);
    assert_eq!(v["global_admissible"], true);
    assert!(v["d3"].as_str().unwrap().starts_with("not computable"));
    assert!(v["d2"].as_f64().unwrap() > 0.5);
}

#[test]
fn verify_passes_on_default_oracle_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &config(LINE, 32, ""), &["verify", "--seed", "7"]);
    let v = stdout_json(&out);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn config_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(LINE, 9, "").replace(r#""eta0": 0.5"#, r#""eta0": -1"#);
    let out = run(dir.path(), &bad, &["bounds"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("physics.eta0") && err.contains("must be > 0"), "{err}");

    let typo = config(LINE, 9, "").replace(r#""force": 1"#, r#""force": 1, "alpha_exp": 2"#);
    let out = run(dir.path(), &typo, &["bounds"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_exp"));

    let out = Command::new(env!("CARGO_BIN_EXE_slider"))
        .arg("bounds")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_slider"))
        .arg("launch")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_table_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &config(r#"{"kind": "tabulated", "path": "nowhere.csv"}"#, 9, ""),
        &["bounds"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["kind"], "io");
}

#[test]
fn tabulated_shape_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    // wedge h0 = |x1| sampled on the 5x5 interior grid plus boundary
    let n = 5;
    let h = 2.0 / (n + 1) as f64;
    let mut csv = String::from("x1,x2,h0,dh0_dx1\n");
    for j in 0..n + 2 {
        for i in 0..n + 2 {
            let x1 = -1.0 + i as f64 * h;
            let x2 = -1.0 + j as f64 * h;
            let slope = if x1 > 0.0 { 1.0 } else if x1 < 0.0 { -1.0 } else { 0.0 };
            csv.push_str(&format!("{x1:?},{x2:?},{:?},{slope:?}\n", x1.abs()));
        }
    }
    fs::write(dir.path().join("table.csv"), csv).unwrap();
    let out = run(
        dir.path(),
        &config(r#"{"kind": "tabulated", "path": "table.csv"}"#, n, ""),
        &["bounds"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(stdout_json(&out)["s1"].is_null());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path).unwrap();
            let cfg = slider_cli::config::parse_config(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.build_problem(path.parent().unwrap()).unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
