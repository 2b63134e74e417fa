use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit counters: one per-sample gradient, one sample visit in SGD, one f64
/// sent or received.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub per_sample_grad_evals: u64,
    pub sgd_sample_visits: u64,
    pub params_broadcast: u64,
    pub grads_broadcast: u64,
    pub update_uploads: u64,
}

impl CostLedger {
    pub fn compute(&self) -> u64 {
        self.per_sample_grad_evals + self.sgd_sample_visits
    }

    pub fn communication(&self) -> u64 {
        self.params_broadcast + self.grads_broadcast + self.update_uploads
    }
}

impl AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.per_sample_grad_evals += rhs.per_sample_grad_evals;
        self.sgd_sample_visits += rhs.sgd_sample_visits;
        self.params_broadcast += rhs.params_broadcast;
        self.grads_broadcast += rhs.grads_broadcast;
        self.update_uploads += rhs.update_uploads;
    }
}

/// `(sgd visits + gradient evaluations)` of the coreset run over the SGD
/// visits of the full-data run.
pub fn compute_cost_ratio(coreset_run: &CostLedger, full_run: &CostLedger) -> Result<f64> {
    if full_run.sgd_sample_visits == 0 {
        return Err(Error::domain("reference run has no SGD visits"));
    }
    Ok(coreset_run.compute() as f64 / full_run.sgd_sample_visits as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_counts_selection_work() {
        let full = CostLedger {
            sgd_sample_visits: 1000,
            ..Default::default()
        };
        let coreset = CostLedger {
            sgd_sample_visits: 100,
            per_sample_grad_evals: 100,
            ..Default::default()
        };
        assert_eq!(compute_cost_ratio(&coreset, &full).unwrap(), 0.2);
        assert!(compute_cost_ratio(&coreset, &CostLedger::default()).is_err());
    }

    #[test]
    fn add_assign_is_fieldwise() {
        let mut a = CostLedger {
            params_broadcast: 3,
            ..Default::default()
        };
        a += CostLedger {
            params_broadcast: 4,
            update_uploads: 1,
            ..Default::default()
        };
        assert_eq!(a.params_broadcast, 7);
        assert_eq!(a.update_uploads, 1);
        assert_eq!(a.communication(), 8);
    }
}
