use std::f64::consts::PI;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::protocol::{ClientPlan, ClientReport, ClientState, ServerState, Upload};
use super::{Algo, CostLedger, FederatedData};
use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_accuracy, RoundMetrics};
use crate::model::{init_params, sgd_epochs, Arch, ModelSpec, ParamVector, SgdConfig};
use crate::seed::{self, Stream};

/// Settings for one arm of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    pub plan: ClientPlan,
    pub clients_per_round: usize,
    pub sgd: SgdConfig,
    /// Total rounds when the local learning rate is cosine-annealed.
    pub cosine_rounds: Option<usize>,
}

impl Protocol {
    pub fn from_config(cfg: &ExperimentConfig, algo: Algo) -> Self {
        Self {
            plan: ClientPlan {
                algo,
                refresh_period: cfg.refresh_period,
                local_epochs: cfg.local_epochs,
                selection: cfg.selection(),
                master_seed: cfg.seed,
            },
            clients_per_round: cfg.clients_per_round(),
            sgd: cfg.sgd(),
            cosine_rounds: cfg.cosine_annealing.then_some(cfg.rounds),
        }
    }

    fn sgd_at(&self, round: usize) -> SgdConfig {
        let mut sgd = self.sgd;
        if let Some(total) = self.cosine_rounds.filter(|&t| t > 0) {
            sgd.lr *= 0.5 * (1.0 + (PI * round as f64 / total as f64).cos());
        }
        sgd
    }
}

/// One coreset refresh on one client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefreshRecord {
    pub round: usize,
    pub client_id: usize,
    pub size: usize,
    pub clean_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub sampled: Vec<usize>,
    pub costs: CostLedger,
    /// Broadcast-parameter loss over every trained row, pooled across clients.
    pub mean_train_loss: f64,
    /// Clean share of the rows trained on this round, for coreset arms; 1
    /// when none were.
    pub clean_fraction: Option<f64>,
    pub refreshes: Vec<RefreshRecord>,
}

/// `m` distinct positions out of `n`, ascending, from the sampling stream of
/// `round`.
pub fn sample_clients(master_seed: u64, round: usize, n: usize, m: usize) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = seed::stream_rng(master_seed, Stream::ClientSampling, round as u64, 0);
    let mut picked = index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    picked
}

/// Broadcast, local work on the sampled clients, aggregation.
pub fn run_round(server: &mut ServerState, clients: &mut [ClientState], protocol: &Protocol) -> Result<RoundOutcome> {
    let round = server.round;
    let plan = &protocol.plan;
    let sampled = sample_clients(plan.master_seed, round, clients.len(), protocol.clients_per_round);
    let with_rows = plan.algo == Algo::Gcfl && round % plan.refresh_period == 0;
    let msg = server.broadcast(with_rows)?;
    let sgd = protocol.sgd_at(round);

    let mut selected = vec![false; clients.len()];
    sampled.iter().for_each(|&i| selected[i] = true);
    let reports: Vec<ClientReport> = clients
        .par_iter_mut()
        .enumerate()
        .filter(|(i, _)| selected[*i])
        .map(|(_, c)| c.handle(&msg, plan, &sgd))
        .collect::<Result<_>>()?;

    let per_client = CostLedger {
        params_broadcast: msg.params.len() as u64,
        grads_broadcast: msg.grad_value_count() as u64,
        update_uploads: msg.params.len() as u64,
        ..Default::default()
    };
    let mut costs = CostLedger::default();
    let (mut trained, mut clean, mut loss_sum) = (0usize, 0usize, 0.0);
    let mut refreshes = Vec::new();
    for r in &reports {
        costs += per_client;
        costs += r.costs;
        trained += r.trained_rows;
        clean += r.clean_rows;
        loss_sum += r.loss_sum;
    }
    for (r, &pos) in reports.iter().zip(&sampled) {
        if r.refreshed {
            if let Some(cs) = &clients[pos].coreset {
                refreshes.push(RefreshRecord {
                    round,
                    client_id: r.upload.client_id,
                    size: cs.len(),
                    clean_fraction: crate::metrics::coreset_composition(cs, &clients[pos].chunk),
                });
            }
        }
    }

    let uploads: Vec<Upload> = reports.into_iter().map(|r| r.upload).collect();
    server.apply(&uploads)?;
    Ok(RoundOutcome {
        sampled,
        costs,
        mean_train_loss: if trained == 0 { f64::NAN } else { loss_sum / trained as f64 },
        clean_fraction: plan
            .algo
            .uses_coreset()
            .then(|| if trained == 0 { 1.0 } else { clean as f64 / trained as f64 }),
        refreshes,
    })
}

/// Outcome of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingResult {
    pub algo: Algo,
    pub history: Vec<RoundMetrics>,
    pub refreshes: Vec<RefreshRecord>,
    pub final_params: ParamVector,
    pub ledger: CostLedger,
    /// Test accuracy after server-side fine-tuning, when enabled.
    pub finetuned_accuracy: Option<f64>,
}

impl TrainingResult {
    pub fn final_accuracy(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |m| m.test_accuracy)
    }

    /// Mean clean fraction over all refreshed coresets; `None` without
    /// refreshes.
    pub fn mean_refresh_clean_fraction(&self) -> Option<f64> {
        if self.refreshes.is_empty() {
            return None;
        }
        Some(self.refreshes.iter().map(|r| r.clean_fraction).sum::<f64>() / self.refreshes.len() as f64)
    }
}

pub fn model_spec(cfg: &ExperimentConfig, data: &FederatedData) -> ModelSpec {
    match cfg.model.arch {
        Arch::SoftmaxRegression => ModelSpec::softmax_regression(data.dim(), data.num_classes()),
        Arch::OneHidden => ModelSpec::one_hidden(data.dim(), cfg.model.hidden_dim, data.num_classes()),
    }
}

/// Runs `cfg.rounds` rounds of `algo` on `data`. Every arm of the same
/// config starts from the same initial parameters.
pub fn run_training(cfg: &ExperimentConfig, data: &FederatedData, algo: Algo) -> Result<TrainingResult> {
    if cfg.honest && algo.is_oracle() {
        return Err(Error::config(format!("algos: {algo} reads ground-truth noise flags; not allowed with honest = true")));
    }
    if data.clients.len() != cfg.num_clients {
        return Err(Error::domain(format!(
            "config expects {} clients, data has {}",
            cfg.num_clients,
            data.clients.len()
        )));
    }
    if data.test.is_empty() {
        return Err(Error::domain("test split is empty"));
    }
    let spec = model_spec(cfg, data);
    let protocol = Protocol::from_config(cfg, algo);
    let mut server = ServerState {
        params: init_params(&spec, seed::derive(cfg.seed, Stream::Init, 0, 0))?,
        round: 0,
        val: data.val.clone(),
        global_lr: cfg.global_lr,
    };
    let mut clients: Vec<ClientState> = data.clients.iter().cloned().map(ClientState::new).collect();
    clients.iter_mut().for_each(|c| c.init_coreset(&protocol.plan));

    let mut ledger = CostLedger::default();
    let mut history = Vec::with_capacity(cfg.rounds);
    let mut refreshes = Vec::new();
    for _ in 0..cfg.rounds {
        let out = run_round(&mut server, &mut clients, &protocol)?;
        ledger += out.costs;
        history.push(RoundMetrics {
            round: server.round - 1,
            test_accuracy: evaluate_accuracy(&server.params, &data.test)?,
            mean_train_loss: out.mean_train_loss,
            coreset_clean_fraction: out.clean_fraction,
            ledger,
        });
        refreshes.extend(out.refreshes);
    }

    let finetuned_accuracy = if cfg.finetune_epochs > 0 {
        let sgd = SgdConfig::plain(cfg.local_lr, cfg.batch_size);
        let tuned = fine_tune_on_server(&server.params, &data.val, cfg.finetune_epochs, &sgd, cfg.seed)?;
        Some(evaluate_accuracy(&tuned, &data.test)?)
    } else {
        None
    };
    Ok(TrainingResult {
        algo,
        history,
        refreshes,
        final_params: server.params,
        ledger,
        finetuned_accuracy,
    })
}

/// Plain SGD on the server's validation set.
pub fn fine_tune_on_server(
    params: &ParamVector,
    val: &Dataset,
    epochs: usize,
    sgd: &SgdConfig,
    seed: u64,
) -> Result<ParamVector> {
    if epochs > 0 && val.is_empty() {
        return Err(Error::domain("fine-tuning needs a non-empty validation set"));
    }
    sgd_epochs(params, val, epochs, sgd, seed::derive(seed, Stream::Init, 1, 0), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_sorted_distinct_and_reproducible() {
        for round in 0..20 {
            let s = sample_clients(7, round, 30, 10);
            assert_eq!(s.len(), 10);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(s, sample_clients(7, round, 30, 10));
        }
        assert_eq!(sample_clients(7, 0, 4, 4), vec![0, 1, 2, 3]);
        assert_ne!(sample_clients(7, 0, 30, 10), sample_clients(7, 1, 30, 10));
    }

    #[test]
    fn cosine_schedule_decays() {
        let cfg = ExperimentConfig::parse(
            "num_clients = 2\nrounds = 10\ncosine_annealing = true\nlocal_lr = 0.2\n[dataset]\nkind = \"blobs\"\n",
        )
        .unwrap();
        let p = Protocol::from_config(&cfg, Algo::FedAvg);
        assert_eq!(p.sgd_at(0).lr, 0.2);
        assert!((p.sgd_at(5).lr - 0.1).abs() < 1e-12);
        assert!(p.sgd_at(9).lr < p.sgd_at(8).lr);
    }
}
