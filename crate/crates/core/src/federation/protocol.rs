//! Messages and the two sides of a round.
//!
//! A client only ever sees a [`Broadcast`]; the server only ever sees
//! [`Upload`]s. Neither type can carry raw samples.

use serde::Serialize;

use super::{Algo, CostLedger};
use crate::coreset::{facility_location_select, labelwise_omp_select, random_select, Coreset, SelectionConfig};
use crate::data::{ClientChunk, Dataset};
use crate::error::{Error, Result};
use crate::model::{labelwise_validation_grads, loss, sgd_epochs, ClassGradientRows, ParamVector, Prox, SgdConfig};
use crate::seed::{self, Stream};

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Broadcast {
    pub round: usize,
    pub params: ParamVector,
    /// Per-class output-layer validation gradient rows; only on refresh
    /// rounds of coreset-by-gradient runs.
    pub class_rows: Option<ClassGradientRows>,
}

impl Broadcast {
    /// Number of f64 values carried by the gradient part.
    pub fn grad_value_count(&self) -> usize {
        self.class_rows.as_ref().map_or(0, ClassGradientRows::value_count)
    }
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Upload {
    pub client_id: usize,
    /// `theta_local - theta_broadcast`.
    pub delta: ParamVector,
}

/// Per-client settings that stay fixed across a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientPlan {
    pub algo: Algo,
    pub refresh_period: usize,
    pub local_epochs: usize,
    pub selection: SelectionConfig,
    pub master_seed: u64,
}

/// What a client reports besides its upload. Used for metrics and the cost
/// ledger, never for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReport {
    pub upload: Upload,
    pub costs: CostLedger,
    pub trained_rows: usize,
    pub clean_rows: usize,
    /// Loss at the broadcast parameters summed over the trained rows.
    pub loss_sum: f64,
    pub refreshed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub chunk: ClientChunk,
    pub coreset: Option<Coreset>,
}

impl ClientState {
    pub fn new(chunk: ClientChunk) -> Self {
        Self { chunk, coreset: None }
    }

    pub fn id(&self) -> usize {
        self.chunk.client_id
    }

    /// Random starting coreset for coreset arms.
    pub fn init_coreset(&mut self, plan: &ClientPlan) {
        if plan.algo.uses_coreset() {
            let budget = plan.selection.budget_for(self.chunk.len());
            let s = seed::derive(plan.master_seed, Stream::Client, self.id() as u64, u64::MAX);
            self.coreset = Some(random_select(&self.chunk, budget, s));
        }
    }

    /// Runs one round of local work against `msg`.
    pub fn handle(&mut self, msg: &Broadcast, plan: &ClientPlan, sgd: &SgdConfig) -> Result<ClientReport> {
        let id = self.id();
        let mut costs = CostLedger::default();
        let refreshed = plan.algo.uses_coreset() && msg.round % plan.refresh_period == 0 && !self.chunk.is_empty();
        if refreshed {
            self.reselect(msg, plan, selection_seed(plan.master_seed, id, msg.round), &mut costs)?;
        }

        let rows: Vec<usize> = match plan.algo {
            Algo::FedAvg | Algo::FedProx { .. } => (0..self.chunk.len()).collect(),
            Algo::Skyline => self.chunk.clean_indices(),
            Algo::Gcfl | Algo::Random | Algo::FacilityLocation => {
                self.coreset.as_ref().map(|c| c.indices.clone()).unwrap_or_default()
            }
        };
        let zero = msg.params.delta_from(&msg.params)?;
        if rows.is_empty() {
            return Ok(ClientReport {
                upload: Upload { client_id: id, delta: zero },
                costs,
                trained_rows: 0,
                clean_rows: 0,
                loss_sum: 0.0,
                refreshed,
            });
        }

        let subset = self.chunk.dataset.subset(&rows);
        let loss_sum = loss(&msg.params, &subset)? * rows.len() as f64;
        let prox = match plan.algo {
            Algo::FedProx { mu } => Some(Prox { mu, anchor: &msg.params }),
            _ => None,
        };
        let s = sgd_seed(plan.master_seed, id, msg.round);
        let delta = client_update(&msg.params, &subset, plan.local_epochs, sgd, s, prox)?;
        costs.sgd_sample_visits += (plan.local_epochs * rows.len()) as u64;
        Ok(ClientReport {
            upload: Upload { client_id: id, delta },
            costs,
            trained_rows: rows.len(),
            clean_rows: rows.iter().filter(|&&i| self.chunk.clean_flags[i]).count(),
            loss_sum,
            refreshed,
        })
    }

    fn reselect(&mut self, msg: &Broadcast, plan: &ClientPlan, s: u64, costs: &mut CostLedger) -> Result<()> {
        let budget = plan.selection.budget_for(self.chunk.len());
        let selected = match plan.algo {
            Algo::Gcfl => {
                let rows = msg.class_rows.as_ref().ok_or_else(|| {
                    Error::domain(format!("round {} is a refresh round but carries no gradient rows", msg.round))
                })?;
                let shares_class = self
                    .chunk
                    .dataset
                    .labels()
                    .iter()
                    .any(|&y| rows.get(y).is_some());
                if !shares_class {
                    // nothing to match against; keep the previous coreset
                    return Ok(());
                }
                costs.per_sample_grad_evals += self.chunk.len() as u64;
                labelwise_omp_select(&self.chunk, &msg.params, rows, budget, &plan.selection)?
            }
            Algo::Random => random_select(&self.chunk, budget, s),
            Algo::FacilityLocation => facility_location_select(&self.chunk, budget),
            _ => return Ok(()),
        };
        self.coreset = Some(selected);
        Ok(())
    }
}

fn client_round_seed(master: u64, client_id: usize, round: usize) -> u64 {
    seed::derive(master, Stream::Client, client_id as u64, round as u64)
}

/// Seed of a client's local SGD shuffles in `round`.
pub fn sgd_seed(master: u64, client_id: usize, round: usize) -> u64 {
    seed::derive(client_round_seed(master, client_id, round), Stream::Client, 0, 2)
}

/// Seed of a client's random coreset draw in `round`.
pub fn selection_seed(master: u64, client_id: usize, round: usize) -> u64 {
    seed::derive(client_round_seed(master, client_id, round), Stream::Client, 0, 1)
}

/// `epochs` of SGD from `theta` on `subset`; returns `theta' - theta`.
pub fn client_update(
    theta: &ParamVector,
    subset: &Dataset,
    epochs: usize,
    sgd: &SgdConfig,
    seed: u64,
    prox: Option<Prox<'_>>,
) -> Result<ParamVector> {
    if subset.is_empty() {
        return Err(Error::domain("client update on an empty subset"));
    }
    let trained = sgd_epochs(theta, subset, epochs, sgd, seed, prox)?;
    trained.delta_from(theta)
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub params: ParamVector,
    pub round: usize,
    pub val: Dataset,
    pub global_lr: f64,
}

impl ServerState {
    pub fn broadcast(&self, with_rows: bool) -> Result<Broadcast> {
        let class_rows = if with_rows {
            if self.val.is_empty() {
                return Err(Error::domain("gradient broadcast needs a non-empty validation set"));
            }
            Some(labelwise_validation_grads(&self.params, &self.val)?)
        } else {
            None
        };
        Ok(Broadcast {
            round: self.round,
            params: self.params.clone(),
            class_rows,
        })
    }

    /// Applies the mean upload and advances the round counter.
    pub fn apply(&mut self, uploads: &[Upload]) -> Result<()> {
        self.params = aggregate(&self.params, uploads, self.global_lr)?;
        self.round += 1;
        Ok(())
    }
}

/// `theta + global_lr * mean(delta)`, summing uploads in client-id order.
pub fn aggregate(theta: &ParamVector, uploads: &[Upload], global_lr: f64) -> Result<ParamVector> {
    if uploads.is_empty() {
        return Err(Error::domain("aggregate needs at least one upload"));
    }
    let mut order: Vec<&Upload> = uploads.iter().collect();
    order.sort_by_key(|u| u.client_id);
    let mut sum = theta.delta_from(theta)?;
    for u in order {
        sum.add_scaled(1.0, &u.delta)?;
    }
    let mut out = theta.clone();
    out.add_scaled(global_lr / uploads.len() as f64, &sum)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn spec() -> ModelSpec {
        ModelSpec::softmax_regression(2, 2)
    }

    fn upload(id: usize, v: f64) -> Upload {
        Upload {
            client_id: id,
            delta: ParamVector::from_values(spec(), vec![v; 6]).unwrap(),
        }
    }

    #[test]
    fn aggregate_scales_mean_delta() {
        let theta = ParamVector::from_values(spec(), vec![1.0; 6]).unwrap();
        let out = aggregate(&theta, &[upload(1, 2.0), upload(0, 4.0)], 0.5).unwrap();
        assert!(out.values().iter().all(|&v| v == 2.5));
        assert!(aggregate(&theta, &[], 1.0).is_err());
    }

    #[test]
    fn aggregate_is_order_independent() {
        let theta = ParamVector::zeros(spec());
        let a = aggregate(&theta, &[upload(0, 0.1), upload(1, 0.2), upload(2, 0.7)], 1.0).unwrap();
        let b = aggregate(&theta, &[upload(2, 0.7), upload(0, 0.1), upload(1, 0.2)], 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_give_zero_delta() {
        let ds = Dataset::new(vec![0.0, 1.0, 1.0, 0.0], vec![0, 1], 2, 2).unwrap();
        let theta = ParamVector::from_values(spec(), vec![0.3; 6]).unwrap();
        let d = client_update(&theta, &ds, 0, &SgdConfig::plain(0.1, 2), 0, None).unwrap();
        assert_eq!(d.norm(), 0.0);
        let empty = Dataset::empty(2, 2);
        assert!(client_update(&theta, &empty, 1, &SgdConfig::plain(0.1, 2), 0, None).is_err());
    }
}
