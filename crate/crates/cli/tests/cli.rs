use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn apwl1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apwl1")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

const SMALL: &str = r#"
n_iters = 60
n_trials = 3
seed = 5
eval_iteration = 50

[scenario]
dim = 20
sparsity = 2
kind = "reconstruction"
noise_var = 0.01
amplitude = "gaussian"

[[algorithms]]
kind = "apwl1"
q = 4

[[algorithms]]
kind = "zalms"
mu = 0.01
rho = 1e-4
"#;

#[test]
fn run_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = apwl1(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("mse.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
    assert_eq!(csv.lines().next().unwrap(), "iteration,apwl1-q4,zalms");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert!(meta["git"].is_string());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["algorithms"][0]["valid_trials"], 3);
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let mut csvs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = apwl1(&["run", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        csvs.push(std::fs::read(out.join("mse.csv")).unwrap());
    }
    assert_ne!(csvs[0], csvs[1]);
}

#[test]
fn sweep_reports_one_row_per_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("sweep");
    let o = apwl1(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "delta",
        "--deviations",
        "-0.1,0,0.5,1.0,-1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    // delta scaled to zero is marked invalid rather than aborting the sweep
    assert!(csv.lines().last().unwrap().contains("nan"));
}

#[test]
fn errors_are_reported_as_json() {
    let o = apwl1(&["run", "--config", "/nonexistent/config.toml"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "io");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, SMALL.replace("n_trials = 3", "n_trials = 0")).unwrap();
    let o = apwl1(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "invalid_parameter");

    let o = apwl1(&["sweep", "--config", cfg.to_str().unwrap(), "--param", "lambda"]);
    assert!(!o.status.success());
}

#[test]
fn verify_passes_and_emits_reports() {
    let o = apwl1(&["verify", "--cases", "200", "--seeds", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 6);
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            apwl1::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}
