use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn degennes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degennes"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn theta_range_gives_nine_rows_with_small_relation_residual() {
    let o = degennes(&["theta", "--gamma", "-2:2:0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|c| *c == "relation_residual").unwrap();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!(r[col].abs() <= 1e-6, "{r:?}");
    }
    // 17 significant digits.
    assert!(text.lines().nth(1).unwrap().starts_with("-2.0000000000000000e0,"));
}

#[test]
fn theta_at_zero_reports_the_constants() {
    let o = degennes(&["theta", "--gamma", "0", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rec = &v["result"][0];
    assert!((rec["theta"].as_f64().unwrap() - 0.590_106_125).abs() < 1e-6);
    assert!((rec["xi_star"].as_f64().unwrap() - 0.768_184_3).abs() < 1e-6);
    assert!((rec["m3"].as_f64().unwrap() - 0.127_034).abs() < 1e-5);
    assert_eq!(v["metadata"]["command"], "theta");
    assert_eq!(v["metadata"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn theta_outside_the_box_is_bad_input() {
    let o = degennes(&["theta", "--gamma", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[-8, 8]"));
    assert_eq!(degennes(&["theta", "--gamma", "1:0:0.5"]).status.code(), Some(2));
}

#[test]
fn profile_reports_coefficients() {
    let o = degennes(&["profile", "--gamma", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = &v["result"]["perturbation"];
    assert!(p["d1"].as_f64().unwrap().abs() < 1e-8);
    assert!(p["d2"].as_f64().unwrap() > 0.0);
    let m3 = v["result"]["record"]["m3"].as_f64().unwrap();
    assert!((v["result"]["d3"].as_f64().unwrap() + 2.0 * m3).abs() < 1e-6);
}

#[test]
fn eig2d_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = degennes(&[
            "eig2d",
            "--curve",
            "circle:1",
            "--h",
            "0.05",
            "--alpha",
            "1",
            "--gamma",
            "0",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["eig2d_summary.json", "eig2d_field.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let s = read_json(&a.join("eig2d_summary.json"));
    let mu = s["result"]["solution"]["mu1"].as_f64().unwrap();
    assert!(mu > 0.0 && mu / 0.05 < 0.6, "{mu}");
    let meta = read_json(&a.join("eig2d.meta.json"));
    assert!(meta["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(meta["metadata"]["config_hash"], s["metadata"]["config_hash"]);
}

#[test]
fn config_typo_points_at_the_bad_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"curve": {"type": "ellipse", "a": 2, "bb": 1}, "h": 0.05, "alpha": 1,
            "gamma": {"type": "constant", "value": 0}}}"#,
    )
    .unwrap();
    let o = degennes(&[
        "eig2d",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/problem/curve/bb"), "{}", stderr(&o));
    assert!(!dir.path().join("eig2d_summary.json").exists());
}

#[test]
fn flags_override_config_and_dry_run_computes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"curve": {"type": "circle", "radius": 1}, "h": 0.08, "alpha": 1,
            "gamma": {"type": "constant", "value": 0}}, "solver": {"tol": 1e-8}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let o = degennes(&[
        "eig2d",
        "--config",
        cfg,
        "--h",
        "0.05",
        "--dry-run",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["problem"]["h"], 0.05);
    assert_eq!(v["config"]["solver"]["tol"], 1e-8);
    assert!(!out.exists());
    // Same effective configuration from flags alone, same hash.
    let o2 = degennes(&["eig2d", "--h", "0.05", "--tol", "1e-8", "--dry-run"]);
    let v2: Value = serde_json::from_str(&stdout(&o2)).unwrap();
    assert_eq!(v["config_hash"], v2["config_hash"]);
    let o3 = degennes(&["eig2d", "--h", "0.04", "--tol", "1e-8", "--dry-run"]);
    let v3: Value = serde_json::from_str(&stdout(&o3)).unwrap();
    assert_ne!(v["config_hash"], v3["config_hash"]);
}

#[test]
fn missing_h_and_bad_h_are_bad_input() {
    assert_eq!(degennes(&["eig2d", "--dry-run"]).status.code(), Some(2));
    assert_eq!(degennes(&["eig2d", "--h", "1.5", "--dry-run"]).status.code(), Some(2));
    assert_eq!(
        degennes(&["eig2d", "--h", "0.05", "--curve", "square:1", "--dry-run"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gauge_check_reports_the_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let o = degennes(&[
        "eig2d",
        "--h",
        "0.08",
        "--gamma",
        "cos:0,0.5",
        "--gauge-check",
        "--gauges",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("max relative deviation of mu1"));
    let s = read_json(&dir.path().join("eig2d_summary.json"));
    let g = &s["result"]["gauge_check"];
    assert!(g["max_relative_deviation"].as_f64().unwrap() <= 1e-8);
    assert_eq!(g["pass"], true);
}

#[test]
fn sweep_writes_cases_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = degennes(&[
        "sweep",
        "--h-list",
        "0.08,0.06",
        "--theorem",
        "propUB",
        "--jobs",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep_cases.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let r = read_json(&dir.path().join("sweep_report.json"));
    assert_eq!(r["result"]["verdicts"]["propUB"]["status"], "pass");
    assert!(dir.path().join("sweep.meta.json").exists());
}

#[test]
fn sweep_rejects_bad_lists_and_theorems() {
    assert_eq!(
        degennes(&["sweep", "--h-list", "0.04,0.08", "--dry-run"]).status.code(),
        Some(2)
    );
    assert_eq!(
        degennes(&["sweep", "--theorem", "kach9", "--dry-run"]).status.code(),
        Some(2)
    );
    assert!(degennes(&["sweep", "--dry-run"]).status.success());
}

#[test]
fn localize_prints_mass_fractions() {
    let o = degennes(&["localize", "--h", "0.08", "--target", "boundary", "--radius", "0.8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let l = &v["result"]["localization"];
    assert!(l["mass_outside"].as_f64().unwrap() < 0.05);
    assert!(l["agmon_rate"].as_f64().unwrap() > 0.0);
    assert_eq!(
        degennes(&["localize", "--h", "0.08", "--target", "nowhere"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_plan_is_bad_input() {
    let o = degennes(&["verify", "--plan", "nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kach1-disk-neg-gamma"));
    let o = degennes(&["verify", "--list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 8);
}

#[test]
fn verify_exit_code_follows_the_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdicts.json");
    let o = degennes(&[
        "verify",
        "--plan",
        "kach1-disk-neg-gamma",
        "--out",
        out.to_str().unwrap(),
    ]);
    let v = read_json(&out);
    let pass = v["result"]["pass"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if pass { 0 } else { 1 }), "{}", stdout(&o));
    assert!(stdout(&o).contains("propUB PASS"), "{}", stdout(&o));
    assert!(dir.path().join("verdicts.meta.json").exists());
}
