use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dominative");

const DISC: &str = r#"
    "n": 2,
    "p": 4.0,
    "epsilon": 0.2,
    "domain": { "shape": "ball", "center": [0.0, 0.0], "radius": 1.0 },
    "T": 0.4,
    "grid": { "ratio": 4.0 },
    "seed": 42"#;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, format!("{{{DISC}{body}\n}}")).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("DOMINATIVE_THREADS")
        .output()
        .unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "payoff": { "kind": "from_reference", "id": "cosh_exp" }"#);
    let flags = ["simulate", "--samples", "2000", "--seed", "42", "--strategy", "random", "--start", "0.1,-0.2,0.35"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&flags, &config, &a).status.success());
    assert!(run(&flags, &config, &b).status.success());
    for file in ["samples.csv", "summary.json"] {
        assert_eq!(read(a.join(file)), read(b.join(file)), "{file} differs");
    }
    let csv = read(a.join("samples.csv"));
    assert_eq!(csv.lines().next().unwrap(), "sample,tau,exit_x1,exit_x2,exit_t,payoff");
    assert_eq!(csv.lines().count(), 2001);
    assert!(!csv.contains('\r'));
    let manifest: serde_json::Value = serde_json::from_str(&read(a.join("manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["outputs"], serde_json::json!(["samples.csv", "summary.json", "manifest.json"]));
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_flag_changes_the_samples() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "payoff": { "kind": "from_reference", "id": "cosh_exp" }"#);
    let base = ["simulate", "--samples", "500", "--strategy", "random"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&[&base[..], &["--seed", "1"]].concat(), &config, &a).status.success());
    assert!(run(&[&base[..], &["--seed", "2"]].concat(), &config, &b).status.success());
    assert_ne!(read(a.join("samples.csv")), read(b.join("samples.csv")));
}

#[test]
fn p_equal_two_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{{{}, \"payoff\": {{ \"kind\": \"constant\", \"value\": 1.0 }}\n}}", DISC.replace("4.0", "2.0"));
    let config = dir.path().join("config.json");
    std::fs::write(&config, body).unwrap();
    let out = run(&["solve"], &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parameter domain"));
}

#[test]
fn unknown_flag_prints_usage_and_exits_two() {
    let out = Command::new(BIN).args(["solve", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = Command::new(BIN).arg("teleport").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_and_missing_file_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "colour": "blue""#);
    assert_eq!(run(&["solve"], &config, &dir.path().join("out")).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["solve"], &missing, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "payoff": { "kind": "constant", "value": 1.0 }"#);
    for value in ["0", "many"] {
        let out = Command::new(BIN)
            .args(["solve", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join("out"))
            .env("DOMINATIVE_THREADS", value)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "DOMINATIVE_THREADS={value}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "payoff": { "kind": "from_reference", "id": "cosh_exp" }"#);
    let mut grids = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(threads);
        let out = Command::new(BIN)
            .args(["solve", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .env("DOMINATIVE_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        grids.push(read(out_dir.join("grid.csv")));
    }
    assert_eq!(grids[0], grids[1]);
}

#[test]
fn solve_writes_grid_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "payoff": { "kind": "from_reference", "id": "quadratic_time" }"#);
    let out_dir = dir.path().join("out");
    assert!(run(&["solve"], &config, &out_dir).status.success());
    let grid = read(out_dir.join("grid.csv"));
    assert_eq!(grid.lines().next().unwrap(), "level,t,x1,x2,value");
    let meta: serde_json::Value = serde_json::from_str(&read(out_dir.join("solve.json"))).unwrap();
    assert!(meta["residual"]["max_abs_residual"].as_f64().unwrap() <= 1e-10);
    assert!(meta["params"].is_object() && meta["grid"].is_object());
}

#[test]
fn converge_reports_columns_and_rate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#", "convergence": { "reference": "cosh_exp", "epsilons": [0.2, 0.1, 0.05], "probes": [[0.0, 0.0, 0.38], [0.2, -0.1, 0.3]] }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["converge"], &config, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(out_dir.join("convergence.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "epsilon,h,sup_error,seconds");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "2.000000000000e-01");
    assert_eq!(first[1], "5.000000000000e-02");
    let summary: serde_json::Value = serde_json::from_str(&read(out_dir.join("summary.json"))).unwrap();
    assert!(summary["rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn failed_checks_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // A negative solver budget cannot be met.
    let config = write_config(
        dir.path(),
        r#", "payoff": { "kind": "from_reference", "id": "cosh_exp" },
            "compare": { "probes": [[0.0, 0.0, 0.35]], "samples": 10000, "tolerance": -1.0 }"#,
    );
    let out = run(&["compare"], &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/compare.csv").exists());
}

#[test]
fn one_step_and_barrier_and_amvf_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#", "simulate": { "samples": 20000, "start": [0.2, -0.1, 0.3] },
            "amvf": { "function": "square", "epsilons": [0.1], "points": [[0.1, 0.2, 0.3]] },
            "barrier": { "z": [0.0, 0.0], "delta": 0.5, "outer_radius": 1.5, "samples": 20000 }"#,
    );
    let steps = dir.path().join("steps");
    assert!(run(&["simulate", "--one-step"], &config, &steps).status.success());
    assert_eq!(read(steps.join("steps.csv")).lines().next().unwrap(), "sample,outcome,dx1,dx2,square");
    let amvf = dir.path().join("amvf");
    assert!(run(&["amvf-check"], &config, &amvf).status.success());
    assert!(read(amvf.join("amvf.csv")).starts_with("epsilon,"));
    let barrier = dir.path().join("barrier");
    let out = run(&["barrier-check", "--seed", "5"], &config, &barrier);
    assert!(barrier.join("barrier.csv").exists(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
}
