use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gcfl_cli::{execute_run, SweepSummary};
use gcfl_core::config::ExperimentConfig;
use gcfl_core::federation::Algo;
use gcfl_core::metrics::read_round_log;
use serde_json::Value;

const CONFIG: &str = r#"
num_clients = 4
rounds = 6
refresh_period = 2
local_lr = 0.2
global_lr = 1.0
algos = ["fedavg", "gcfl", "skyline"]

[dataset]
kind = "blobs"
num_blobs = 4
dim = 4
samples_per_blob = 80

[noise]
kind = "closed_set"
ratio = 0.3
"#;

fn gcfl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcfl"))
        .args(args)
        .current_dir(dir)
        .env_remove("GCFL_OUT_DIR")
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn run_writes_one_log_per_arm_and_a_summary() {
    let dir = setup();
    let out = gcfl(&["run", "--config", "exp.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    for arm in ["fedavg", "gcfl", "skyline"] {
        let log = read_round_log(&res.join(format!("{arm}.csv"))).unwrap();
        assert_eq!(log.len(), 6);
        assert_eq!(log.iter().map(|m| m.round).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(res.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["arms"].as_array().unwrap().len(), 3);
    assert_eq!(summary["manifest"]["seed"], 0);
    assert!(res.join("config.toml").exists());
}

#[test]
fn dry_run_prints_resolved_config_and_writes_nothing() {
    let dir = setup();
    let out = gcfl(
        &["run", "--config", "exp.toml", "--dry-run", "--out", "res", "--seed", "9", "--noise.ratio", "0.1"],
        dir.path(),
    );
    assert!(out.status.success());
    let cfg = ExperimentConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.noise.ratio, 0.1);
    assert!(!dir.path().join("res").exists());
}

#[test]
fn bad_input_exits_with_usage_code() {
    let dir = setup();
    let unknown = gcfl(&["run", "--config", "exp.toml", "--no_such_key", "1"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("no_such_key"));
    let param = gcfl(&["sweep", "--config", "exp.toml", "--param", "rounds", "--values", "1,2"], dir.path());
    assert_eq!(param.status.code(), Some(2));
}

#[test]
fn noise_sweep_records_every_value_and_arm() {
    let dir = setup();
    let out = gcfl(
        &[
            "sweep", "--config", "exp.toml", "--out", "sw", "--param", "noise.ratio", "--values", "0,0.2,0.4",
            "--algos", "fedavg,gcfl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sw = dir.path().join("sw");
    let summary: SweepSummary = serde_json::from_str(&fs::read_to_string(sw.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary.records.len(), 6);
    for v in ["0", "0.2", "0.4"] {
        assert!(sw.join(format!("noise.ratio={v}")).join("summary.json").exists());
        let gcfl = summary.records.iter().find(|r| r.value == v && r.algo == Algo::Gcfl).unwrap();
        assert!(gcfl.compute_cost_ratio.unwrap() < 1.0);
    }
}

#[test]
fn longer_refresh_period_costs_less() {
    let dir = setup();
    let out = gcfl(
        &[
            "sweep", "--config", "exp.toml", "--out", "sw", "--param", "refresh_period", "--values", "1,2,6",
            "--algos", "fedavg,gcfl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: SweepSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sw/sweep.json")).unwrap()).unwrap();
    let ratios: Vec<f64> = summary
        .records
        .iter()
        .filter(|r| r.algo == Algo::Gcfl)
        .map(|r| r.compute_cost_ratio.unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = setup();
    let mut cfg = ExperimentConfig::parse(CONFIG).unwrap();
    cfg.output_dir = dir.path().join("first");
    let first = execute_run(&cfg).unwrap();

    let mut again = ExperimentConfig::parse(&fs::read_to_string(cfg.output_dir.join("config.toml")).unwrap()).unwrap();
    again.output_dir = dir.path().join("second");
    let second = execute_run(&again).unwrap();

    assert_eq!(first.summary.manifest.data_fingerprint, second.summary.manifest.data_fingerprint);
    for (a, b) in first.summary.arms.iter().zip(&second.summary.arms) {
        assert_eq!(a.final_accuracy, b.final_accuracy);
    }
    for arm in ["fedavg", "gcfl", "skyline"] {
        let name = format!("{arm}.csv");
        assert_eq!(
            fs::read(cfg.output_dir.join(&name)).unwrap(),
            fs::read(again.output_dir.join(&name)).unwrap()
        );
    }
}
