//! Experiment runner behind the `gcfl` binary.
//!
//! `run` executes every configured arm on one shared data realization and
//! writes a round log per arm plus `summary.json`. `sweep` repeats `run` once
//! per value of a single parameter, each in its own subdirectory, and
//! collects the final accuracies into `sweep.json`.

use std::fs;
use std::path::{Path, PathBuf};

use gcfl_core::config::{DatasetSpec, ExperimentConfig};
use gcfl_core::federation::{prepare_data, run_training, Algo, TrainingResult};
use gcfl_core::metrics::{write_json, write_round_log, RunManifest, Summary, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "GCFL_OUT_DIR";

pub const SWEEP_PARAMS: [&str; 5] = [
    "noise.ratio",
    "budget_fraction",
    "dirichlet_alpha",
    "refresh_period",
    "num_clients",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gcfl_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Splits `--key value` and `--key=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("expected --key value, got {arg:?}")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--{key} needs a value")))?;
                out.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(out)
}

/// Reads, overrides and validates a config file. Relative CSV dataset paths
/// are taken relative to the config file.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut cfg = ExperimentConfig::parse_with_overrides(&text, overrides)?;
    if let DatasetSpec::Csv { path: csv, .. } = &mut cfg.dataset {
        if csv.is_relative() {
            if let Some(dir) = path.parent() {
                *csv = dir.join(&*csv);
            }
        }
    }
    Ok(cfg)
}

/// Config file < environment < `--out` flag.
pub fn resolve_out_dir(cfg: &ExperimentConfig, env: Option<&str>, flag: Option<&Path>) -> PathBuf {
    match (flag, env) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(e)) if !e.is_empty() => PathBuf::from(e),
        _ => cfg.output_dir.clone(),
    }
}

/// File stem of an arm's round log.
pub fn arm_file_stem(algo: &Algo) -> String {
    algo.to_string().replace(':', "_")
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: Summary,
    pub results: Vec<TrainingResult>,
}

/// Runs every arm of `cfg` on one data realization and writes
/// `config.toml`, `<arm>.csv` and `summary.json` into `cfg.output_dir`.
pub fn execute_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let data = prepare_data(cfg)?;
    let manifest = RunManifest::new(cfg, data.fingerprint());
    let config_path = out.join("config.toml");
    fs::write(&config_path, &manifest.config).map_err(io_err(&config_path))?;

    let mut results = Vec::with_capacity(cfg.algos.len());
    for algo in &cfg.algos {
        let result = run_training(cfg, &data, *algo)?;
        write_round_log(&out.join(format!("{}.csv", arm_file_stem(algo))), &result.history)?;
        results.push(result);
    }
    let summary = Summary::new(manifest, &results);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(RunOutput { summary, results })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub value: String,
    pub algo: Algo,
    pub final_accuracy: f64,
    pub compute_cost_ratio: Option<f64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub param: String,
    pub values: Vec<String>,
    pub records: Vec<SweepRecord>,
}

/// Resolves one config per sweep value, failing before any run starts.
pub fn sweep_configs(
    config_path: &Path,
    base_overrides: &[(String, String)],
    param: &str,
    values: &[String],
) -> Result<Vec<ExperimentConfig>> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::Usage(format!(
            "cannot sweep {param:?}; choose one of {}",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|v| {
            let mut o = base_overrides.to_vec();
            o.push((param.to_string(), v.clone()));
            load_config(config_path, &o).map_err(|e| match e {
                CliError::Core(e) => CliError::Usage(format!("{param} = {v}: {e}")),
                other => other,
            })
        })
        .collect()
}

/// Runs each resolved config under `<out>/<param>=<value>` and writes
/// `<out>/sweep.json`.
pub fn execute_sweep(
    configs: Vec<ExperimentConfig>,
    param: &str,
    values: &[String],
    out: &Path,
) -> Result<SweepSummary> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut records = Vec::new();
    for (mut cfg, value) in configs.into_iter().zip(values) {
        cfg.output_dir = out.join(format!("{param}={value}"));
        let run = execute_run(&cfg)?;
        for arm in &run.summary.arms {
            records.push(SweepRecord {
                value: value.clone(),
                algo: arm.algo,
                final_accuracy: arm.final_accuracy,
                compute_cost_ratio: arm.compute_cost_ratio,
                out_dir: cfg.output_dir.clone(),
            });
        }
    }
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        param: param.to_string(),
        values: values.to_vec(),
        records,
    };
    write_json(&out.join("sweep.json"), &summary)?;
    Ok(summary)
}
