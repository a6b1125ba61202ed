use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use transitory_cli::table::{parse_csv, Table};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_transitory"));
    for (k, _) in std::env::vars() {
        if k.starts_with("TRANSITORY_") {
            c.env_remove(k);
        }
    }
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(dir: &Path, args: &[&str], out: &str) -> (Output, PathBuf) {
    let target = dir.join(out);
    let o = bin().args(args).arg("--out").arg(&target).output().unwrap();
    (o, target)
}

fn table(dir: &Path, name: &str) -> Table {
    parse_csv(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BALANCED: &str = r#"{
  "n": 100000,
  "service": {"kind": "exponential", "mean": 1.0},
  "scatter": {"kind": "uniform", "lo": 0.0, "hi": 1.0},
  "rho": 0.9,
  "reps": 3,
  "grid_points": 200
}"#;

#[test]
fn simulate_is_identical_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", BALANCED);
    let cfg = cfg.to_str().unwrap();
    let (a, da) = run(tmp.path(), &["simulate", "--config", cfg, "--seed", "7", "--workers", "1"], "w1");
    let (b, db) = run(tmp.path(), &["simulate", "--config", cfg, "--seed", "7", "--workers", "8"], "w8");
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    for f in ["workload.csv", "summary.csv"] {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap(), "{f}");
    }
    let (_, dc) = run(tmp.path(), &["simulate", "--config", cfg, "--seed", "8"], "s8");
    assert_ne!(std::fs::read(da.join("workload.csv")).unwrap(), std::fs::read(dc.join("workload.csv")).unwrap());
}

#[test]
fn simulate_tracks_the_fluid_limit() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", BALANCED);
    let (o, d) = run(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap()], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let gaps = table(&d, "summary.csv").column("sup_abs_fluid_gap").unwrap();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.iter().all(|&g| g <= 0.02), "{gaps:?}");
}

#[test]
fn periodic_simulation_runs_over_all_periods() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.json",
        r#"{"n": 1000, "service": {"kind": "deterministic", "value": 1.0},
            "scatter": {"kind": "uniform", "lo": 0.0, "hi": 1.0}, "rho": 1.05,
            "periods": {"num_periods": 3}, "grid_points": 30}"#,
    );
    let (o, d) = run(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap()], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let t = table(&d, "workload.csv");
    assert_eq!(t.column("t").unwrap().last().copied(), Some(3.0));
    assert!(t.column("fluid").is_none());
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let missing = write_config(tmp.path(), "m.json", r#"{"service": {"kind": "exponential", "mean": 1.0}}"#);
    let (o, _) = run(tmp.path(), &["simulate", "--config", missing.to_str().unwrap()], "m");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"), "{}", stderr(&o));

    let unknown = write_config(tmp.path(), "u.json", r#"{"lambda_maximum": 3}"#);
    let (o, _) = run(tmp.path(), &["transient", "--config", unknown.to_str().unwrap()], "u");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda_maximum"));

    let broken = write_config(tmp.path(), "b.json", "{ not json");
    let (o, _) = run(tmp.path(), &["fluid", "--config", broken.to_str().unwrap()], "b");
    assert_eq!(o.status.code(), Some(2));

    let (o, _) = run(tmp.path(), &["fluid", "--seed", "minus-one"], "c");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_file_carries_provenance() {
    let tmp = TempDir::new().unwrap();
    let (o, d) = run(tmp.path(), &["ldp", "--seed", "42"], "out");
    assert!(o.status.success());
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(manifest["seed"], 42);
    for f in manifest["files"].as_array().unwrap() {
        let text = std::fs::read_to_string(d.join(f.as_str().unwrap())).unwrap();
        assert!(text.starts_with(&format!("# transitory {}", env!("CARGO_PKG_VERSION"))), "{f}");
        assert!(text.contains("# seed: 42\n"));
        assert!(text.contains(&format!("# config_hash: {hash}\n")));
    }
}

#[test]
fn env_overrides_sit_between_file_and_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.json", r#"{"points": 11, "reps": 0, "seed": 3}"#);
    let out = tmp.path().join("env");
    let o = bin()
        .args(["transient", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("TRANSITORY_POINTS", "6")
        .env("TRANSITORY_MOMENTS__VARIANCE", "0.5")
        .env("TRANSITORY_SEED", "5")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["points"], 6);
    assert_eq!(m["config"]["moments"]["variance"], 0.5);
    assert_eq!(m["seed"], 5);
    assert_eq!(table(&out, "transient.csv").rows.len(), 6);

    let o = bin()
        .args(["transient", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()])
        .env("TRANSITORY_SEED", "5")
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
}

#[test]
fn transient_columns_agree() {
    let tmp = TempDir::new().unwrap();
    let (o, d) = run(tmp.path(), &["transient"], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let t = table(&d, "transient.csv");
    let worst = t.column("abs_closed_minus_quadrature").unwrap().into_iter().fold(0.0, f64::max);
    assert!(worst <= 1e-8, "{worst}");
    let q = t.column("quadrature").unwrap();
    let mc = t.column("mc").unwrap();
    let gap = q.iter().zip(&mc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 0.01, "{gap}");

    // σ_V = 0: the law is the reflected bridge
    let cfg = write_config(tmp.path(), "s0.json", r#"{"moments": {"mean": 1.0, "variance": 0.0}, "reps": 0}"#);
    let (o, d) = run(tmp.path(), &["transient", "--config", cfg.to_str().unwrap()], "s0");
    assert!(o.status.success());
    let t = table(&d, "transient.csv");
    for (c, b) in t.column("closed").unwrap().iter().zip(t.column("bridge").unwrap()) {
        assert!((c - b).abs() < 1e-15);
    }
    assert!(t.column("mc").unwrap().iter().all(|v| v.is_nan()));
}

#[test]
fn ldp_reports_minimizers_and_a_monotone_path() {
    let tmp = TempDir::new().unwrap();
    let ex2 = write_config(
        tmp.path(),
        "ex2.json",
        r#"{"problem": {"t": 0.5, "x": 1000.0, "c_prime": 5.6,
            "scatter": {"kind": "exponential", "rate": 1.0}}}"#,
    );
    let (o, d) = run(tmp.path(), &["ldp", "--config", ex2.to_str().unwrap()], "ex2");
    assert!(o.status.success(), "{}", stderr(&o));
    let ts = table(&d, "minimizer.csv").column("t_star").unwrap()[0];
    assert!((ts - 0.3).abs() <= 0.02, "{ts}");
    let path = table(&d, "rare_path.csv").column("path").unwrap();
    assert!(path.windows(2).all(|w| w[1] >= w[0]));
    let rate = table(&d, "rate_function.csv");
    assert_eq!(rate.columns, ["s", "rate"]);

    // uniform scattering, c' = 1.03, x = 0.5: I'(s) increases on [0, t), so the
    // minimizer sits at the left end
    let (o, d) = run(tmp.path(), &["ldp"], "ex1");
    assert!(o.status.success());
    let ts = table(&d, "minimizer.csv").column("t_star").unwrap()[0];
    assert!(ts <= 1e-6, "{ts}");
    let path = table(&d, "rare_path.csv").column("path").unwrap();
    assert!(path.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn x_condition_violation_exits_3_with_threshold() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"problem": {"x": 0.01, "c_prime": 0.5}}"#);
    for cmd in ["ldp", "rare-path", "is-estimate"] {
        let (o, _) = run(tmp.path(), &[cmd, "--config", cfg.to_str().unwrap()], cmd);
        assert_eq!(o.status.code(), Some(3), "{cmd}");
        // fluid workload at t = 0.5 with c' = 0.5 is 0.25
        assert!(stderr(&o).contains("2.5000000000000000e-1"), "{}", stderr(&o));
    }
}

#[test]
fn importance_sampling_agrees_with_crude_monte_carlo() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "is.json", r#"{"n": 20, "reps": 20000, "crude_reps": 40000}"#);
    let (o, d) = run(tmp.path(), &["is-estimate", "--config", cfg.to_str().unwrap()], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let t = table(&d, "is_estimate.csv");
    let z = t.column("z_is_vs_crude").unwrap()[0];
    assert!(z <= 3.0, "{z}");
    let lr = t.column("lr_mean").unwrap()[0];
    let se = t.column("lr_std_err").unwrap()[0];
    assert!((lr - 1.0).abs() <= 3.0 * se, "{lr} ± {se}");
}

#[test]
fn tail_boundary_case_and_exact_column() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tail.json", r#"{"c": 1.0, "cs2": 3.0, "x": [10.0, 1.0], "reps": 4000}"#);
    let (o, d) = run(tmp.path(), &["tail", "--config", cfg.to_str().unwrap()], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let t = table(&d, "tail.csv");
    assert_eq!(t.column("t_star").unwrap()[0], 1.0);
    assert_eq!(t.column("boundary").unwrap()[0], 1.0);
    // x = 1 is interior: t* = xK/(cK + 2x) = 2/3
    assert!((t.column("t_star").unwrap()[1] - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(t.column("boundary").unwrap()[1], 0.0);
    let exact = t.column("exact").unwrap()[1];
    let mc = t.column("mc").unwrap()[1];
    let se = t.column("mc_std_err").unwrap()[1];
    assert!((exact - mc).abs() <= 4.0 * se, "{exact} vs {mc} ± {se}");
}

#[test]
fn periodic_first_slot_is_the_one_period_law() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "p.json", r#"{"t": 1.0}"#);
    let (o, d) = run(tmp.path(), &["periodic", "--config", cfg.to_str().unwrap()], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let t = table(&d, "periodic.csv");
    assert_eq!(t.column("transient").unwrap(), t.column("one_period").unwrap());

    let cfg = write_config(tmp.path(), "q.json", r#"{"moments": {"mean": 0.0, "variance": 1.0}}"#);
    let (o, d) = run(tmp.path(), &["periodic", "--config", cfg.to_str().unwrap()], "nosteady");
    assert!(o.status.success());
    assert!(table(&d, "periodic.csv").column("steady").unwrap().iter().all(|v| v.is_nan()));

    let cfg = write_config(tmp.path(), "r.json", r#"{"t": 0.5}"#);
    let (o, _) = run(tmp.path(), &["periodic", "--config", cfg.to_str().unwrap()], "early");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fluid_output_is_a_two_column_file() {
    let tmp = TempDir::new().unwrap();
    let (o, d) = run(tmp.path(), &["fluid"], "out");
    assert!(o.status.success());
    let t = table(&d, "fluid.csv");
    assert_eq!(t.columns, ["t", "fluid_workload"]);
    assert_eq!(t.rows.len(), 201);
    // exp(1) work, uniform arrivals, c/n = 0.9: W/n = 0.1·t
    let last = t.rows.last().unwrap();
    assert!((last[1] - 0.1).abs() < 1e-9, "{last:?}");
}

#[test]
fn validate_forced_failure_names_the_criterion() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.json", r#"{"criteria": [7], "tolerance_scale": 0.0}"#);
    let (o, d) = run(tmp.path(), &["validate", "--config", cfg.to_str().unwrap()], "out");
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion 7 [FAIL]"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(d.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["criteria"][0]["id"], 7);
    assert_eq!(v["criteria"][0]["passed"], false);
}

#[test]
fn validate_verdict_schema_is_stable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.json", r#"{"criteria": [7, 9]}"#);
    let keys = |v: &Value| {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    let mut seen = Vec::new();
    for run_id in ["a", "b"] {
        let (o, d) = run(tmp.path(), &["validate", "--config", cfg.to_str().unwrap()], run_id);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        let v: Value = serde_json::from_str(&std::fs::read_to_string(d.join("verdict.json")).unwrap()).unwrap();
        assert_eq!(keys(&v), ["config_hash", "criteria", "passed", "seed", "version"]);
        for c in v["criteria"].as_array().unwrap() {
            assert_eq!(keys(c), ["checks", "id", "passed", "title"]);
            for check in c["checks"].as_array().unwrap() {
                assert_eq!(keys(check), ["limit", "name", "note", "passed", "required", "value"]);
            }
        }
        seen.push(v);
    }
    assert_eq!(seen[0]["config_hash"], seen[1]["config_hash"]);

    let bad = write_config(tmp.path(), "bad.json", r#"{"criteria": [12]}"#);
    let (o, _) = run(tmp.path(), &["validate", "--config", bad.to_str().unwrap()], "bad");
    assert_eq!(o.status.code(), Some(2));
}
