//! End-to-end runs of the compiled binary against generated fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curecal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_error(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_else(|| panic!("empty stderr: {stderr}"));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {stderr}"))
}

struct Lcg(u64);

impl Lcg {
    fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn gauss(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-12);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Survival fixture with a cured fraction and exponential censoring, two
/// covariates centered on `shift`.
fn write_cohort(path: &Path, n: usize, seed: u64, shift: f64) {
    let mut rng = Lcg(seed);
    let mut csv = String::from("time,event,x1,x2\n");
    for _ in 0..n {
        let x1 = shift + rng.gauss();
        let x2 = shift + rng.gauss();
        let cured = rng.uniform() < 0.35;
        let t = -20.0 * rng.uniform().max(1e-12).ln();
        let c = -80.0 * rng.uniform().max(1e-12).ln();
        let (time, event) = if cured || c < t { (c, 0) } else { (t, 1) };
        csv.push_str(&format!("{time:.4},{event},{x1:.4},{x2:.4}\n"));
    }
    std::fs::write(path, csv).expect("fixture written");
}

fn fixture_pair(dir: &Path, shift_trial: f64) -> (PathBuf, PathBuf) {
    let hist = dir.join("hist.csv");
    let trial = dir.join("trial.csv");
    write_cohort(&hist, 150, 9, 0.0);
    write_cohort(&trial, 150, 104729, shift_trial);
    (hist, trial)
}

#[test]
fn identical_populations_agree_across_estimators() {
    let dir = TempDir::new().unwrap();
    let (hist, trial) = fixture_pair(dir.path(), 0.0);
    let out = dir.path().join("out");
    let result = run(&[
        "estimate",
        "--historical",
        hist.to_str().unwrap(),
        "--trial",
        trial.to_str().unwrap(),
        "--weights",
        "maic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("estimates.json")).unwrap())
            .unwrap();
    let estimates = report["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 4);
    let values: Vec<f64> = estimates
        .iter()
        .map(|e| e["estimate"]["value"].as_f64().unwrap())
        .collect();
    let spread = values.iter().cloned().fold(f64::MIN, f64::max)
        - values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.03, "estimator spread {spread} across {values:?}");
    assert!(values.iter().all(|v| (0.2..0.6).contains(v)), "{values:?}");
}

#[test]
fn missing_trial_file_exits_two_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    let (hist, _) = fixture_pair(dir.path(), 0.0);
    let missing = dir.path().join("nope.csv");
    let result = run(&[
        "estimate",
        "--historical",
        hist.to_str().unwrap(),
        "--trial",
        missing.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let error = stderr_error(&result);
    assert_eq!(error["error"]["kind"], "io");
    assert!(
        error["error"]["message"].as_str().unwrap().contains("nope.csv"),
        "{error}"
    );
}

#[test]
fn bootstrap_without_a_seed_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let (hist, trial) = fixture_pair(dir.path(), 0.0);
    let result = run(&[
        "estimate",
        "--historical",
        hist.to_str().unwrap(),
        "--trial",
        trial.to_str().unwrap(),
        "--bootstrap",
        "100",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert_eq!(stderr_error(&result)["error"]["kind"], "usage");
}

#[test]
fn seeded_bootstrap_is_bit_reproducible() {
    let dir = TempDir::new().unwrap();
    let (hist, trial) = fixture_pair(dir.path(), 0.1);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let result = run(&[
            "estimate",
            "--historical",
            hist.to_str().unwrap(),
            "--trial",
            trial.to_str().unwrap(),
            "--estimator",
            "po",
            "--bootstrap",
            "120",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
        outputs.push(std::fs::read(out.join("estimates.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn curves_have_flat_tails_beyond_follow_up() {
    let dir = TempDir::new().unwrap();
    let (hist, trial) = fixture_pair(dir.path(), 0.0);
    let out = dir.path().join("out");
    let result = run(&[
        "curves",
        "--historical",
        hist.to_str().unwrap(),
        "--trial",
        trial.to_str().unwrap(),
        "--weights",
        "maic",
        "--times",
        "10,50,100000,200000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    assert!(
        String::from_utf8_lossy(&result.stderr).contains("beyond the last observed time"),
        "missing extrapolation warning"
    );
    let csv = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time,km,po,km_maic,po_maic");
    assert_eq!(lines.len(), 5);
    let tail: Vec<Vec<&str>> =
        lines[3..].iter().map(|l| l.split(',').collect()).collect();
    // beyond the horizon every column is frozen
    assert_eq!(tail[0][1..], tail[1][1..]);
}

#[test]
fn curves_default_to_the_event_time_grid() {
    let dir = TempDir::new().unwrap();
    let (hist, _) = fixture_pair(dir.path(), 0.0);
    let out = dir.path().join("out");
    let result = run(&[
        "curves",
        "--historical",
        hist.to_str().unwrap(),
        "--weights",
        "none",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    let events = std::fs::read_to_string(&hist)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("1"))
        .count();
    // all event times in the fixture are distinct with 4-decimal rounding
    assert_eq!(csv.lines().count(), events + 1);
    assert_eq!(csv.lines().next().unwrap(), "time,km,po");
}

#[test]
fn weight_diagnostics_on_a_self_calibration_fixture() {
    let dir = TempDir::new().unwrap();
    let hist = dir.path().join("hist.csv");
    write_cohort(&hist, 120, 77, 0.0);
    let out = dir.path().join("out");
    let result = run(&[
        "weights",
        "--historical",
        hist.to_str().unwrap(),
        "--trial",
        hist.to_str().unwrap(),
        "--weights",
        "maic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diag["n"], 120);
    assert!(diag["ess"].as_f64().unwrap() > 119.999);
    assert!(diag["max_balance_residual"].as_f64().unwrap() < 1e-8);
    let weights = std::fs::read_to_string(out.join("weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 121);
    for line in weights.lines().skip(1) {
        let w: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((w - 1.0 / 120.0).abs() < 1e-10);
    }
}

#[test]
fn infeasible_target_exits_one_with_the_violation() {
    let dir = TempDir::new().unwrap();
    let (hist, trial) = fixture_pair(dir.path(), 50.0);
    let result = run(&[
        "weights",
        "--historical",
        hist.to_str().unwrap(),
        "--trial",
        trial.to_str().unwrap(),
        "--weights",
        "maic",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    let error = stderr_error(&result);
    assert_eq!(error["error"]["kind"], "infeasible");
    assert!(
        error["error"]["message"].as_str().unwrap().contains("infeasible"),
        "{error}"
    );
}

const SIM_CONFIG: &str = "\
[[scenario]]
n = 60
p = 2
a = 0.7
g = -0.3
b = 0.5
shape = 1.0
truth_n = 10000
replicates = 10

[[scenario]]
kind = \"survival\"
n = 60
p = 2
a = 0.7
g = 0.3
b = 0.5
shape = 1.0
truth_n = 10000
trial_n = 40
replicates = 10
times = [25.0, 100.0]
";

#[test]
fn simulate_smoke_run_is_fast_deterministic_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(&config, SIM_CONFIG).unwrap();

    let started = std::time::Instant::now();
    let mut tables = Vec::new();
    let mut errors = Vec::new();
    for (name, threads) in [("a", None), ("b", None), ("t1", Some("1")), ("t4", Some("4"))] {
        let out = dir.path().join(name);
        let mut args = vec![
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        let result = run(&args);
        assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
        tables.push(std::fs::read(out.join("table.csv")).unwrap());
        errors.push(std::fs::read(out.join("survival_1_errors.csv")).unwrap());
        assert!(out.join("table.txt").exists());
        assert!(out.join("survival_1_summary.csv").exists());
    }
    assert!(tables.iter().all(|t| *t == tables[0]), "tables differ across runs/threads");
    assert!(errors.iter().all(|e| *e == errors[0]), "errors differ across runs/threads");
    assert!(
        started.elapsed() < std::time::Duration::from_secs(40),
        "four smoke runs took {:?}",
        started.elapsed()
    );
}

#[test]
fn malformed_scenario_config_fails_before_any_computation() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[[scenario]]\nn = 60\nbogus = 1\n").unwrap();
    let out = dir.path().join("out");
    let result = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert_eq!(stderr_error(&result)["error"]["kind"], "usage");
    assert!(!out.exists(), "no outputs before validation passes");
}

#[test]
fn unadjusted_estimates_need_no_trial_cohort() {
    let dir = TempDir::new().unwrap();
    let hist = dir.path().join("hist.csv");
    write_cohort(&hist, 100, 15, 0.0);
    let out = dir.path().join("out");
    let result = run(&[
        "estimate",
        "--historical",
        hist.to_str().unwrap(),
        "--weights",
        "none",
        "--estimator",
        "po",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("estimates.json")).unwrap())
            .unwrap();
    assert_eq!(report["estimates"][0]["estimate"]["weight_method"], "uniform");
}
