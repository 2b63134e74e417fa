//! Experiment configuration.
//!
//! Configs are TOML: flat protocol keys at the top level plus `[dataset]`,
//! `[noise]` and `[model]` tables. Only `num_clients` and `[dataset]` are
//! required; everything else has a default. Overrides use dotted key paths
//! (`noise.ratio = 0.4`) and are applied before validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::coreset::SelectionConfig;
use crate::data::{NoiseKind, NoiseSpec};
use crate::error::{Error, Result};
use crate::federation::Algo;
use crate::model::{Arch, SgdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Gaussian blobs; `stds` wins over the linear `std_min..std_max` spread.
    Blobs {
        #[serde(default = "defaults::num_blobs")]
        num_blobs: usize,
        #[serde(default = "defaults::dim")]
        dim: usize,
        #[serde(default = "defaults::samples_per_blob")]
        samples_per_blob: usize,
        #[serde(default = "defaults::std_min")]
        std_min: f64,
        #[serde(default = "defaults::std_max")]
        std_max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stds: Option<Vec<f64>>,
    },
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub arch: Arch,
    #[serde(default = "defaults::hidden_dim")]
    pub hidden_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: Arch::SoftmaxRegression,
            hidden_dim: defaults::hidden_dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    pub num_clients: usize,
    /// Defaults to `num_clients` (full participation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clients_per_round: Option<usize>,
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    #[serde(default = "defaults::refresh_period")]
    pub refresh_period: usize,
    #[serde(default = "defaults::budget_fraction")]
    pub budget_fraction: f64,
    #[serde(default = "defaults::local_epochs")]
    pub local_epochs: usize,
    #[serde(default = "defaults::lr")]
    pub local_lr: f64,
    #[serde(default = "defaults::lr")]
    pub global_lr: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Cosine-anneal the local learning rate over the rounds.
    #[serde(default)]
    pub cosine_annealing: bool,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::per_iteration_picks")]
    pub per_iteration_picks: usize,
    #[serde(default)]
    pub residual_tolerance: f64,
    #[serde(default = "defaults::dirichlet_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default = "defaults::val_frac")]
    pub val_frac: f64,
    #[serde(default = "defaults::test_frac")]
    pub test_frac: f64,
    /// Server-side fine-tuning epochs on the validation set after the last
    /// round; 0 disables the fine-tuned comparison.
    #[serde(default)]
    pub finetune_epochs: usize,
    /// Reject oracle arms (skyline).
    #[serde(default)]
    pub honest: bool,
    #[serde(default = "defaults::algos")]
    pub algos: Vec<Algo>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub model: ModelConfig,
}

mod defaults {
    use std::path::PathBuf;

    use crate::federation::Algo;

    pub fn num_blobs() -> usize {
        10
    }
    pub fn dim() -> usize {
        10
    }
    pub fn samples_per_blob() -> usize {
        500
    }
    pub fn std_min() -> f64 {
        1.0
    }
    pub fn std_max() -> f64 {
        8.0
    }
    pub fn hidden_dim() -> usize {
        16
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("runs")
    }
    pub fn rounds() -> usize {
        100
    }
    pub fn refresh_period() -> usize {
        10
    }
    pub fn budget_fraction() -> f64 {
        0.1
    }
    pub fn local_epochs() -> usize {
        1
    }
    pub fn lr() -> f64 {
        0.01
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn lambda() -> f64 {
        0.5
    }
    pub fn per_iteration_picks() -> usize {
        1
    }
    pub fn dirichlet_alpha() -> f64 {
        0.4
    }
    pub fn val_frac() -> f64 {
        0.05
    }
    pub fn test_frac() -> f64 {
        0.15
    }
    pub fn algos() -> Vec<Algo> {
        vec![Algo::FedAvg, Algo::Gcfl]
    }
}

impl ExperimentConfig {
    /// Parses TOML text, applies `overrides` and validates.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(format!("malformed config: {}", e.message())))?;
        for (key, value) in overrides {
            set_path(&mut table, key, value)?;
        }
        let mut cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        cfg.clients_per_round.get_or_insert(cfg.num_clients);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML form of the resolved config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn clients_per_round(&self) -> usize {
        self.clients_per_round.unwrap_or(self.num_clients)
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            budget_fraction: self.budget_fraction,
            lambda: self.lambda,
            per_iteration_picks: self.per_iteration_picks,
            residual_tolerance: self.residual_tolerance,
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.local_lr,
            batch_size: self.batch_size,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, constraint: String| Err(Error::config(format!("{key}: {constraint}")));
        if self.seed > i64::MAX as u64 {
            return fail("seed", format!("must be <= {} (TOML integers are signed)", i64::MAX));
        }
        if self.num_clients == 0 {
            return fail("num_clients", "must be >= 1".into());
        }
        let m = self.clients_per_round();
        if m == 0 || m > self.num_clients {
            return fail(
                "clients_per_round",
                format!("must satisfy 1 <= clients_per_round ({m}) <= num_clients ({})", self.num_clients),
            );
        }
        if self.refresh_period == 0 {
            return fail("refresh_period", "must be >= 1".into());
        }
        if !(self.global_lr.is_finite() && self.global_lr > 0.0) {
            return fail("global_lr", format!("must be > 0 (got {})", self.global_lr));
        }
        if !(self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0) {
            return fail("dirichlet_alpha", format!("must be > 0 (got {})", self.dirichlet_alpha));
        }
        let frac_ok = |f: f64| (0.0..1.0).contains(&f);
        if !frac_ok(self.val_frac) || !frac_ok(self.test_frac) || self.val_frac + self.test_frac >= 1.0 {
            return fail("val_frac/test_frac", "must be >= 0 and sum to less than 1".into());
        }
        if self.algos.is_empty() {
            return fail("algos", "at least one algorithm arm is required".into());
        }
        if self.honest && self.algos.iter().any(Algo::is_oracle) {
            return fail("algos", "skyline is an oracle arm and cannot run with honest = true".into());
        }
        for algo in &self.algos {
            if let Algo::FedProx { mu } = algo {
                if !(mu.is_finite() && *mu >= 0.0) {
                    return fail("algos", format!("fedprox mu must be >= 0 (got {mu})"));
                }
            }
        }
        if self.model.arch == Arch::OneHidden && self.model.hidden_dim == 0 {
            return fail("model.hidden_dim", "must be >= 1".into());
        }
        self.selection()
            .validate()
            .or_else(|e| fail("selection", e.to_string()))?;
        self.sgd().validate().or_else(|e| fail("training", e.to_string()))?;
        self.noise.validate().or_else(|e| fail("noise", e.to_string()))?;
        if self.noise.kind == NoiseKind::None && self.noise.ratio > 0.0 {
            return fail("noise.kind", "ratio given without a noise kind".into());
        }
        if let DatasetSpec::Blobs {
            num_blobs,
            dim,
            samples_per_blob,
            stds,
            ..
        } = &self.dataset
        {
            if *num_blobs == 0 || *dim == 0 || *samples_per_blob == 0 {
                return fail("dataset", "num_blobs, dim and samples_per_blob must be >= 1".into());
            }
            if stds.as_ref().is_some_and(|s| s.len() != *num_blobs) {
                return fail("dataset.stds", format!("needs exactly {num_blobs} entries"));
            }
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` inside `table`, creating tables along the way.
///
/// `value` is read as a TOML literal; text that is not valid TOML becomes a
/// string, or a list of items when it contains commas.
pub fn set_path(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("malformed override key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::config(format!("{key}: {part} is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_literal(value));
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let scalar = |s: &str| {
        format!("v = {s}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(s.trim().to_string()))
    };
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key just parsed"),
        Err(_) if raw.contains(',') => toml::Value::Array(raw.split(',').map(|s| scalar(s.trim())).collect()),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "num_clients = 4\n[dataset]\nkind = \"blobs\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.clients_per_round(), 4);
        assert_eq!(cfg.local_epochs, 1);
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.refresh_period, 10);
        assert_eq!(cfg.local_lr, 0.01);
        assert_eq!(cfg.global_lr, 0.01);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.noise.kind, NoiseKind::None);
        assert_eq!(cfg.model.arch, Arch::SoftmaxRegression);
        assert!(matches!(cfg.dataset, DatasetSpec::Blobs { num_blobs: 10, dim: 10, .. }));
    }

    #[test]
    fn too_many_sampled_clients_names_the_constraint() {
        let text = format!("clients_per_round = 5\n{MINIMAL}");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("clients_per_round"), "{err}");
        assert!(err.contains("num_clients"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse(&format!("bogus = 1\n{MINIMAL}")).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = ExperimentConfig::parse(&format!("{MINIMAL}wat = 2\n")).unwrap_err().to_string();
        assert!(err.contains("wat"), "{err}");
    }

    #[test]
    fn type_mismatch_is_reported() {
        let err = ExperimentConfig::parse(&format!("rounds = \"many\"\n{MINIMAL}")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn overrides_use_dotted_paths() {
        let overrides = vec![
            ("noise.kind".to_string(), "closed_set".to_string()),
            ("noise.ratio".to_string(), "0.4".to_string()),
            ("algos".to_string(), "fedavg,gcfl,skyline".to_string()),
            ("seed".to_string(), "9".to_string()),
        ];
        let cfg = ExperimentConfig::parse_with_overrides(MINIMAL, &overrides).unwrap();
        assert_eq!(cfg.noise.ratio, 0.4);
        assert_eq!(cfg.noise.kind, NoiseKind::ClosedSet);
        assert_eq!(cfg.algos, vec![Algo::FedAvg, Algo::Gcfl, Algo::Skyline]);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn canonical_toml_round_trips_byte_for_byte() {
        let text = format!("algos = [\"fedprox:0.01\", \"random\"]\n{MINIMAL}std_min = 2.0\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let echo = cfg.to_toml();
        let again = ExperimentConfig::parse(&echo).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), echo);
    }

    #[test]
    fn honest_mode_rejects_skyline() {
        let text = format!("honest = true\nalgos = [\"skyline\"]\n{MINIMAL}");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn invariants_checked() {
        for bad in ["refresh_period = 0", "budget_fraction = 0.0", "budget_fraction = 1.5", "algos = []"] {
            assert!(ExperimentConfig::parse(&format!("{bad}\n{MINIMAL}")).is_err(), "{bad}");
        }
    }
}
