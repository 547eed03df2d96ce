use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crossmoments"));
    c.env_remove("CROSSMOMENTS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn config(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const GAUSS: &str = r#"{"model": {"kind": "GaussianExp", "params": {"scale": 1.0}}}"#;

#[test]
fn geman_gaussian_converges() {
    let dir = TempDir::new().unwrap();
    let out = run(&["geman", "--config", &config(&dir, "g.json", GAUSS), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["report"]["class"], "Converges");
    assert!(!v["report"]["table"].as_array().unwrap().is_empty());
    // defaults are recorded in the report
    assert_eq!(v["config"]["quadrature"]["one_d"]["grid"]["k_max"], 40);
}

#[test]
fn geman_sine_cosine_has_zero_sigma2_column() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.json", r#"{"model": {"kind": "SineCosine", "params": {"w": 2.0}}}"#);
    let out = run(&["geman", "--config", &cfg, "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["report"]["class"], "Converges");
    assert!(v["report"]["table"].as_array().unwrap().iter().all(|r| r["sigma2"] == 0.0));
}

#[test]
fn geman_divergent_model_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "d.json", r#"{"model": {"kind": "ScaleMixture", "params": {"base": 2.0, "decay": 1.5}}}"#);
    assert_eq!(run(&["geman", "--config", &cfg]).status.code(), Some(4));
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "m.json", r#"{"model": {"kind": "GaussianExp", "params": {"scale": 1.0}"#);
    let out = run(&["geman", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("model"), "{}", stderr(&out));

    let cfg = config(&dir, "u.json", r#"{"model": {"kind": "GaussianExp", "params": {}}, "monte_carlo": {"replicatez": 10}}"#);
    let out = run(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("monte_carlo.replicatez"), "{}", stderr(&out));

    let cfg = config(&dir, "p.json", r#"{"model": {"kind": "GaussianExp", "params": {"scale": -1.0}}}"#);
    assert_eq!(run(&["geman", "--config", &cfg]).status.code(), Some(2));

    let out =
        bin().args(["geman", "--config", &config(&dir, "g.json", GAUSS)]).env("CROSSMOMENTS_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("CROSSMOMENTS_THREADS"));
}

#[test]
fn moments_1d_reports_and_traces() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = config(&dir, "g.json", GAUSS);
    let out = run(&["moments", "--config", &cfg, "--json", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let rep = &v["reports"][0];
    // matches the library quadrature at u = 0, T = 1
    let sf = rep["second_factorial"].as_f64().unwrap();
    assert!((sf - 0.02596).abs() < 1e-4, "{sf}");
    assert!((rep["mean"].as_f64().unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    let csv = std::fs::read_to_string(out_dir.join("integrand.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "level_index,tau,value,mu1,sigma2,correlation,abs_moment,density");
    assert_eq!(lines.count(), 200);
    assert!(!csv.contains('\r'));
    assert_eq!(std::fs::read_to_string(out_dir.join("moments.json")).unwrap().as_bytes(), out.stdout.as_slice());
}

#[test]
fn moments_divergent_model_flags_infinity() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "d.json", r#"{"model": {"kind": "ScaleMixture", "params": {"decay": 1.5}}}"#);
    let out = run(&["moments", "--config", &cfg, "--json"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert_eq!(v["reports"][0]["second_factorial"], "inf");
    assert_eq!(v["reports"][0]["geman"]["class"], "Diverges");
}

#[test]
fn moments_length_is_finite() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "l.json",
        r#"{"field": [{"kind": "GaussianExp", "params": {"scale": 1.0}}], "levels": [1.0],
            "domain": {"rect": {"width": 0.5, "height": 0.5}},
            "quadrature": {"radial": {"nodes_per_panel": 8, "inner": {"target_rel_se": 0.05}}}}"#,
    );
    let out = run(&["moments", "--config", &cfg, "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["reports"][0]["second_moment"].as_f64().unwrap() > 0.0);
}

fn simulate(dir: &Path, cfg: &str, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--config", cfg, "--json", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "g.json",
        r#"{"model": {"kind": "GaussianExp", "params": {}}, "domain": {"interval": {"t_len": 2.0}}, "levels": [0.0, 1.0]}"#,
    );
    let a = dir.path().join("a");
    let flags = ["--seed", "5", "--replicates", "300", "--resolution", "512"];
    let snapshot = || {
        let o = simulate(&a, &cfg, &flags);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (o, std::fs::read(a.join("ensemble.csv")).unwrap(), std::fs::read(a.join("aggregate.json")).unwrap())
    };
    let (oa, ca, ja) = snapshot();
    let (ob, cb, jb) = snapshot();
    assert_eq!(oa.stdout, ob.stdout);
    assert_eq!(ca, cb);
    assert_eq!(ja, jb);
    // two levels, two resolutions
    assert_eq!(String::from_utf8(ca).unwrap().lines().count(), 1 + 300 * 2 * 2);
    // flags win over the file and are recorded
    let v = json(&oa);
    assert_eq!(v["config"]["monte_carlo"]["seed"], 5);
    assert_eq!(v["config"]["monte_carlo"]["replicates"], 300);

    let oc = simulate(&a, &cfg, &["--seed", "6", "--replicates", "300", "--resolution", "512"]);
    assert_ne!(oc.stdout, oa.stdout);
}

#[test]
fn simulate_rejects_zero_replicates() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "g.json", GAUSS);
    let out = simulate(dir.path(), &cfg, &["--replicates", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("monte_carlo.replicates"));
}

#[test]
fn simulate_sine_cosine_period_counts_two() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "s.json",
        r#"{"model": {"kind": "SineCosine", "params": {"w": 6.283185307179586}}, "domain": {"interval": {"t_len": 1.0}},
            "monte_carlo": {"replicates": 500, "resolution": 1024}}"#,
    );
    let out = simulate(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let agg = &json(&out)["ensemble"]["aggregates"][0]["per_resolution"][0];
    assert_eq!(agg["mean"], 2.0);
    assert_eq!(agg["variance"], 0.0);
}

#[test]
fn validate_filter_runs_only_the_classifier() {
    let out = run(&["validate", "--filter", "geman", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["group"], "geman");
    assert_eq!(v["passed"], true);
}

#[test]
fn validate_tampered_tolerance_fails() {
    let out = run(&["validate", "--filter", "lcov", "--tolerance-scale", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] criterion  2"));
}

#[test]
fn validate_unknown_filter_is_a_config_error() {
    let out = run(&["validate", "--filter", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("filter"));
}
