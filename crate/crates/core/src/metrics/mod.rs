//! Accuracy, coreset composition and run artifacts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::coreset::Coreset;
use crate::data::{ClientChunk, Dataset};
use crate::error::{Error, Result};
use crate::federation::{compute_cost_ratio, Algo, CostLedger, TrainingResult};
use crate::model::{predict, ParamVector};

/// Bumped whenever the summary layout changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const ROUND_LOG_HEADER: [&str; 9] = [
    "round",
    "test_accuracy",
    "mean_train_loss",
    "coreset_clean_fraction",
    "grad_evals",
    "sgd_visits",
    "params_bcast",
    "grads_bcast",
    "uploads",
];

pub fn evaluate_accuracy(params: &ParamVector, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::domain("accuracy on an empty test set"));
    }
    if test.dim() != params.spec().input_dim {
        return Err(Error::domain("test set and model disagree on the input dimension"));
    }
    let hits = test.rows().filter(|(x, y)| predict(params, x) == *y).count();
    Ok(hits as f64 / test.len() as f64)
}

/// Fraction of the coreset's rows still flagged clean; 1 for an empty
/// coreset.
pub fn coreset_composition(coreset: &Coreset, chunk: &ClientChunk) -> f64 {
    if coreset.is_empty() {
        return 1.0;
    }
    let clean = coreset.indices.iter().filter(|&&i| chunk.clean_flags[i]).count();
    clean as f64 / coreset.len() as f64
}

/// One row of the round log. The ledger is cumulative.
///
/// Floats are written in their shortest exact form, so a log read back
/// compares equal to what was written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub test_accuracy: f64,
    pub mean_train_loss: f64,
    /// Clean share of the rows trained on; coreset arms only.
    pub coreset_clean_fraction: Option<f64>,
    pub ledger: CostLedger,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    round: usize,
    test_accuracy: f64,
    mean_train_loss: f64,
    coreset_clean_fraction: Option<f64>,
    grad_evals: u64,
    sgd_visits: u64,
    params_bcast: u64,
    grads_bcast: u64,
    uploads: u64,
}

pub fn write_round_log(path: &Path, rows: &[RoundMetrics]) -> Result<()> {
    let fmt_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fmt_err)?;
    if rows.is_empty() {
        w.write_record(ROUND_LOG_HEADER).map_err(fmt_err)?;
    }
    for m in rows {
        w.serialize(CsvRow {
            round: m.round,
            test_accuracy: m.test_accuracy,
            mean_train_loss: m.mean_train_loss,
            coreset_clean_fraction: m.coreset_clean_fraction,
            grad_evals: m.ledger.per_sample_grad_evals,
            sgd_visits: m.ledger.sgd_sample_visits,
            params_bcast: m.ledger.params_broadcast,
            grads_bcast: m.ledger.grads_broadcast,
            uploads: m.ledger.update_uploads,
        })
        .map_err(fmt_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_round_log(path: &Path) -> Result<Vec<RoundMetrics>> {
    let fmt_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(fmt_err)?;
    let header: Vec<String> = r.headers().map_err(fmt_err)?.iter().map(str::to_string).collect();
    if header != ROUND_LOG_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(fmt_err)?;
            Ok(RoundMetrics {
                round: row.round,
                test_accuracy: row.test_accuracy,
                mean_train_loss: row.mean_train_loss,
                coreset_clean_fraction: row.coreset_clean_fraction,
                ledger: CostLedger {
                    per_sample_grad_evals: row.grad_evals,
                    sgd_sample_visits: row.sgd_visits,
                    params_broadcast: row.params_bcast,
                    grads_broadcast: row.grads_bcast,
                    update_uploads: row.uploads,
                },
            })
        })
        .collect()
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub seed: u64,
    pub data_fingerprint: String,
    /// Resolved config in canonical TOML form.
    pub config: String,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, data_fingerprint: String) -> Self {
        Self {
            library_version: crate::LIBRARY_VERSION.to_string(),
            seed: cfg.seed,
            data_fingerprint,
            config: cfg.to_toml(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub algo: Algo,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub finetuned_accuracy: Option<f64>,
    pub mean_refresh_clean_fraction: Option<f64>,
    pub ledger: CostLedger,
    /// Compute cost relative to the fedavg arm of the same run.
    pub compute_cost_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub arms: Vec<ArmSummary>,
}

impl Summary {
    pub fn new(manifest: RunManifest, results: &[TrainingResult]) -> Self {
        let fedavg = results.iter().find(|r| r.algo == Algo::FedAvg).map(|r| r.ledger);
        let arms = results
            .iter()
            .map(|r| ArmSummary {
                algo: r.algo,
                final_accuracy: r.final_accuracy(),
                best_accuracy: r.history.iter().map(|m| m.test_accuracy).fold(f64::NAN, f64::max),
                finetuned_accuracy: r.finetuned_accuracy,
                mean_refresh_clean_fraction: r.mean_refresh_clean_fraction(),
                ledger: r.ledger,
                compute_cost_ratio: fedavg.and_then(|f| compute_cost_ratio(&r.ledger, &f).ok()),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            manifest,
            arms,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn accuracy_counts_argmax_hits() {
        let spec = ModelSpec::softmax_regression(1, 2);
        // logits: (x, -x)
        let p = ParamVector::from_values(spec, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let test = Dataset::new(vec![1.0, -1.0, 2.0, -3.0], vec![0, 1, 1, 1], 1, 2).unwrap();
        assert_eq!(evaluate_accuracy(&p, &test).unwrap(), 0.75);
        assert!(evaluate_accuracy(&p, &Dataset::empty(1, 2)).is_err());
    }

    #[test]
    fn composition_of_empty_coreset_is_one() {
        let ds = Dataset::new(vec![0.0, 1.0, 2.0], vec![0, 0, 0], 1, 1).unwrap();
        let mut chunk = ClientChunk::new(0, ds);
        chunk.clean_flags[1] = false;
        assert_eq!(coreset_composition(&Coreset::uniform(vec![]), &chunk), 1.0);
        assert_eq!(coreset_composition(&Coreset::uniform(vec![0, 1]), &chunk), 0.5);
    }

    #[test]
    fn round_log_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let rows: Vec<RoundMetrics> = (0..4)
            .map(|t| RoundMetrics {
                round: t,
                test_accuracy: 0.1 * t as f64 + 1.0 / 3.0,
                mean_train_loss: (t as f64 + 0.5).ln(),
                coreset_clean_fraction: (t % 2 == 0).then_some(0.6),
                ledger: CostLedger {
                    sgd_sample_visits: 10 * t as u64,
                    ..Default::default()
                },
            })
            .collect();
        write_round_log(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), ROUND_LOG_HEADER.join(","));
        assert_eq!(read_round_log(&path).unwrap(), rows);
    }
}
