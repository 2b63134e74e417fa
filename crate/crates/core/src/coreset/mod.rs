//! Coreset selection: gradient-matching OMP (plain and label-wise), random
//! and facility location.

mod facility;
mod labelwise;
mod omp;
mod random;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use facility::{facility_location_greedy, facility_location_select, FacilitySelection};
pub use labelwise::{class_budgets, labelwise_omp_select};
pub use omp::{omp_select, ridge_weights, OmpParams, OmpSelection};
pub use random::random_select;

use crate::error::{Error, Result};
use crate::round_count;

/// Indices of one class's selection and their weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassSelection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Selected sample indices into a client chunk with non-negative weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Coreset {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    /// Populated by label-wise selection.
    pub per_class: Option<BTreeMap<usize, ClassSelection>>,
}

impl Coreset {
    pub fn uniform(indices: Vec<usize>) -> Self {
        let weights = vec![1.0; indices.len()];
        Self {
            indices,
            weights,
            per_class: None,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    /// Coreset size as a fraction of the client's chunk, in (0, 1].
    pub budget_fraction: f64,
    /// Ridge coefficient of the weight solve.
    pub lambda: f64,
    pub per_iteration_picks: usize,
    pub residual_tolerance: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            budget_fraction: 0.1,
            lambda: 0.5,
            per_iteration_picks: 1,
            residual_tolerance: 0.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::config(format!(
                "budget_fraction must lie in (0, 1] (got {})",
                self.budget_fraction
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be >= 0 (got {})", self.lambda)));
        }
        if self.per_iteration_picks == 0 {
            return Err(Error::config("per_iteration_picks must be >= 1"));
        }
        if !(self.residual_tolerance.is_finite() && self.residual_tolerance >= 0.0) {
            return Err(Error::config("residual_tolerance must be >= 0"));
        }
        Ok(())
    }

    /// `round(b * n)`, at least one sample for a non-empty chunk.
    pub fn budget_for(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            round_count(self.budget_fraction * n as f64).clamp(1, n)
        }
    }

    pub(crate) fn omp_params(&self, budget: usize) -> OmpParams {
        OmpParams {
            budget,
            lambda: self.lambda,
            per_iteration_picks: self.per_iteration_picks,
            tol: self.residual_tolerance,
        }
    }
}
