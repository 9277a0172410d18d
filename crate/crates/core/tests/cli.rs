use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wahba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wahba")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn simulate(dir: &TempDir, name: &str, extra: &[&str]) -> String {
    let p = path(dir, name);
    let mut args = vec!["simulate", "--output", &p];
    args.extend_from_slice(extra);
    assert_eq!(wahba(&args).status.code(), Some(0));
    p
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "zero.json");
    fs::write(&bad, r#"{"pairs": [{"body": [0, 0, 0], "reference": [0, 0, 1], "weight": 1}]}"#).unwrap();
    let out = wahba(&["solve", "--input", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pair 0"));

    assert_eq!(wahba(&["solve", "--input", &path(&dir, "missing.json")]).status.code(), Some(1));
    assert_eq!(wahba(&["solve"]).status.code(), Some(1));
    assert_eq!(wahba(&["hessian", "--builtin", "--quat", "1,2,3"]).status.code(), Some(1));
    assert_eq!(wahba(&["sweep", "--builtin", "--samples", "0"]).status.code(), Some(1));
    assert_eq!(wahba(&["sweep", "--builtin", "--norm-range", "2,1"]).status.code(), Some(1));
    assert_eq!(wahba(&["simulate", "--pairs", "0", "--output", &path(&dir, "x.json")]).status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, "a.json", &["--pairs", "5", "--noise", "0.01", "--seed", "42"]);
    let b = simulate(&dir, "b.json", &["--pairs", "5", "--noise", "0.01", "--seed", "42"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(format!("{a}.meta.json")).unwrap(), fs::read(format!("{b}.meta.json")).unwrap());
    let c = simulate(&dir, "c.json", &["--pairs", "5", "--noise", "0.01", "--seed", "43"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn single_pair_has_unit_weight() {
    let dir = TempDir::new().unwrap();
    let p = simulate(&dir, "one.json", &["--pairs", "1", "--weights", "7"]);
    let v: Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(v["pairs"][0]["weight"], 1.0);
}

#[test]
fn zero_noise_round_trip_recovers_truth() {
    let dir = TempDir::new().unwrap();
    let p = simulate(&dir, "s.json", &["--pairs", "4", "--seed", "7"]);
    let meta: Value = serde_json::from_str(&fs::read_to_string(format!("{p}.meta.json")).unwrap()).unwrap();
    let truth: Vec<f64> = meta["truth"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();

    let trace = path(&dir, "trace.csv");
    let out = wahba(&["solve", "--input", &p, "--method", "lma", "--seed", "3", "--trace", &trace]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["converged"], true);
    assert!(v["agreement_angle_rad"].as_f64().unwrap() < 1e-6);
    let q: Vec<f64> = v["final_q"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let dot: f64 = q.iter().zip(&truth).map(|(a, b)| a * b).sum();
    assert!(dot.abs() > 1.0 - 1e-10);

    let csv = fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,loss,grad_norm,q0,q1,q2,q3,min_eig"));
    assert_eq!(lines.count(), v["iterations"].as_u64().unwrap() as usize + 1);
}

#[test]
fn davenport_method_is_closed_form() {
    let dir = TempDir::new().unwrap();
    let p = simulate(&dir, "s.json", &["--pairs", "3", "--noise", "0.02", "--seed", "1"]);
    let out_path = path(&dir, "result.json");
    let out = wahba(&["solve", "--input", &p, "--method", "davenport", "--output", &out_path]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(v["termination_reason"], "closed_form");
    assert_eq!(v["final_q"], v["davenport_q"]);
    let lambda = v["davenport_lambda"].as_f64().unwrap();
    assert!((v["final_loss"].as_f64().unwrap() - 2.0 * (1.0 - lambda)).abs() < 1e-12);
}

#[test]
fn iteration_cap_exits_two() {
    let dir = TempDir::new().unwrap();
    let p = simulate(&dir, "s.json", &["--pairs", "3", "--noise", "0.02"]);
    let out = wahba(&["solve", "--input", &p, "--method", "gda", "--step-size", "1e-4", "--max-iters", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["termination_reason"], "max_iters");
}

#[test]
fn hessian_reference_classifications() {
    let cases = [
        ("0.420683700201250,0.400737998146962,0.095142157864169,0.496684391636530", "indefinite"),
        ("0.118759061535262,-0.346543560044311,-0.817997262250335,0.443491065576337", "positive-semidefinite"),
        ("-0.353622599299341,0.046434526687823,-0.7929475022018079,-1.550514474779561", "positive-definite"),
    ];
    for (q, class) in cases {
        let out = wahba(&["hessian", "--builtin", "--quat", q]);
        assert_eq!(out.status.code(), Some(0));
        let v = json(&out);
        assert_eq!(v["classification"], class);
        assert_eq!(v["bound_satisfied"], true);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("-1.626747464510") || class != "indefinite");
    }
}

fn sweep_classes(args: &[&str], dir: &Path) -> (Vec<String>, String) {
    let csv = dir.join("sweep.csv").to_string_lossy().into_owned();
    let mut full = vec!["sweep", "--builtin", "--output", &csv];
    full.extend_from_slice(args);
    let out = wahba(&full);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    let classes = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    (classes, String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn sweep_regions() {
    let dir = TempDir::new().unwrap();
    let (outside, summary) = sweep_classes(&["--samples", "300", "--norm-range", "1,2"], dir.path());
    assert_eq!(outside.len(), 300);
    assert!(outside.iter().all(|c| c.starts_with("positive")));
    assert!(summary.starts_with("psd_fraction_norm_ge_1=1.000000"));

    let (inside, _) = sweep_classes(&["--samples", "300", "--norm-range", "0.3,0.9"], dir.path());
    assert!(inside.iter().any(|c| c == "indefinite"));

    let first = fs::read(dir.path().join("sweep.csv")).unwrap();
    sweep_classes(&["--samples", "300", "--norm-range", "0.3,0.9"], dir.path());
    assert_eq!(first, fs::read(dir.path().join("sweep.csv")).unwrap());
}

#[test]
fn verify_exit_codes() {
    let ok = wahba(&["verify"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("-1.626747464510996"));
    assert!(text.contains("8/8 checks passed"));

    let bad = wahba(&["verify", "--entry-table-hessian"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL  trace identity"));
}
