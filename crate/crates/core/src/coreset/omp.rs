//! Orthogonal matching pursuit over per-sample gradients.
//!
//! The residual is `r = target - sum_j w_j g_j` over the current support.
//! Each iteration adds the unselected candidates closest to `r` in
//! Euclidean distance (lowest index wins ties), then re-solves every weight
//! on the enlarged support:
//!
//! ```text
//! w = argmin_{w >= 0}  lambda ||w||^2 + || G w - target ||^2
//! ```
//!
//! by an active-set solve on the normal equations. Keeping the previous
//! weights (new entries zero) stays feasible, so with `lambda = 0` the
//! residual norm can only shrink as the support grows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpParams {
    pub budget: usize,
    pub lambda: f64,
    pub per_iteration_picks: usize,
    /// Stop once the residual norm is at or below this value.
    pub tol: f64,
}

impl OmpParams {
    pub fn new(budget: usize, lambda: f64) -> Self {
        Self {
            budget,
            lambda,
            per_iteration_picks: 1,
            tol: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("omp budget must be >= 1"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("omp lambda must be >= 0"));
        }
        if self.per_iteration_picks == 0 {
            return Err(Error::config("per_iteration_picks must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::config("omp tolerance must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpSelection {
    /// Candidate positions in selection order.
    pub indices: Vec<usize>,
    /// Final clipped weights aligned with `indices`.
    pub weights: Vec<f64>,
    /// `||r||` before the first pick, then after every weight re-solve.
    pub residual_norms: Vec<f64>,
    /// `lambda ||w||^2 + ||r||^2` at the same points.
    pub objectives: Vec<f64>,
}

impl OmpSelection {
    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().expect("initial norm always recorded")
    }
}

pub fn omp_select<G: AsRef<[f64]>>(candidates: &[G], target: &[f64], params: &OmpParams) -> Result<OmpSelection> {
    params.validate()?;
    if candidates.is_empty() {
        return Err(Error::domain("omp: no candidates"));
    }
    let dim = target.len();
    if candidates.iter().any(|g| g.as_ref().len() != dim) {
        return Err(Error::domain("omp: candidate and target lengths differ"));
    }

    let n = candidates.len();
    let mut taken = vec![false; n];
    let mut indices: Vec<usize> = Vec::with_capacity(params.budget.min(n));
    let mut weights: Vec<f64> = Vec::new();
    let mut residual = target.to_vec();
    let mut residual_norms = vec![norm(&residual)];
    let mut objectives = vec![dot(&residual, &residual)];
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n);

    while indices.len() < params.budget.min(n) && norm(&residual) > params.tol {
        let picks = params
            .per_iteration_picks
            .min(params.budget - indices.len())
            .min(n - indices.len());
        scored.clear();
        scored.extend(
            (0..n)
                .filter(|&j| !taken[j])
                .map(|j| (squared_distance(candidates[j].as_ref(), &residual), j)),
        );
        scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &scored[..picks] {
            taken[j] = true;
            indices.push(j);
        }

        weights = ridge_weights(candidates, &indices, target, params.lambda);
        residual = weighted_residual(candidates, &indices, &weights, target);
        residual_norms.push(norm(&residual));
        objectives.push(params.lambda * dot(&weights, &weights) + dot(&residual, &residual));
    }

    Ok(OmpSelection {
        indices,
        weights,
        residual_norms,
        objectives,
    })
}

/// Non-negative ridge least squares on the columns `support`:
/// `argmin_{w >= 0} lambda ||w||^2 + ||G_S w - target||^2`.
pub fn ridge_weights<G: AsRef<[f64]>>(candidates: &[G], support: &[usize], target: &[f64], lambda: f64) -> Vec<f64> {
    let s = support.len();
    if s == 0 {
        return Vec::new();
    }
    let mut gram = DMatrix::<f64>::zeros(s, s);
    let mut rhs = DVector::<f64>::zeros(s);
    for (a, &i) in support.iter().enumerate() {
        let gi = candidates[i].as_ref();
        rhs[a] = dot(gi, target);
        for (b, &j) in support.iter().enumerate().take(a + 1) {
            let v = dot(gi, candidates[j].as_ref());
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
        gram[(a, a)] += lambda;
    }
    nonnegative_quadratic(&gram, &rhs)
}

/// Lawson-Hanson active set for `min_{w >= 0} 1/2 w^T Q w - c^T w` with `Q`
/// symmetric positive semi-definite.
fn nonnegative_quadratic(q: &DMatrix<f64>, c: &DVector<f64>) -> Vec<f64> {
    let s = c.len();
    let scale = c.amax().max(q.amax()).max(f64::MIN_POSITIVE);
    let eps = 1e-13 * scale;
    let mut w = DVector::<f64>::zeros(s);
    let mut passive = vec![false; s];

    for _ in 0..3 * s + 10 {
        let grad = c - q * &w;
        let entering = (0..s)
            .filter(|&j| !passive[j] && grad[j] > eps)
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]).then(b.cmp(&a)));
        let Some(j) = entering else { break };
        passive[j] = true;

        loop {
            let z = solve_passive(q, c, &passive);
            if (0..s).all(|i| !passive[i] || z[i] > 0.0) {
                w = z;
                break;
            }
            // step back to the boundary and drop the coordinates that hit it
            let mut alpha = f64::INFINITY;
            for i in (0..s).filter(|&i| passive[i] && z[i] <= 0.0) {
                alpha = alpha.min(w[i] / (w[i] - z[i]));
            }
            w += (z - &w) * alpha;
            for i in 0..s {
                if passive[i] && w[i] <= eps.min(1e-15) {
                    passive[i] = false;
                    w[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    w.iter().map(|v| v.max(0.0)).collect()
}

fn solve_passive(q: &DMatrix<f64>, c: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let k = idx.len();
    let sub_q = DMatrix::from_fn(k, k, |a, b| q[(idx[a], idx[b])]);
    let sub_c = DVector::from_fn(k, |a, _| c[idx[a]]);
    let sol = match sub_q.clone().cholesky() {
        Some(chol) => chol.solve(&sub_c),
        // singular when lambda = 0 and columns are dependent: minimum-norm solution
        None => sub_q
            .svd(true, true)
            .solve(&sub_c, 1e-12 * sub_c.amax().max(1.0))
            .unwrap_or_else(|_| DVector::zeros(k)),
    };
    let mut full = DVector::zeros(passive.len());
    for (a, &i) in idx.iter().enumerate() {
        full[i] = sol[a];
    }
    full
}

pub(crate) fn weighted_residual<G: AsRef<[f64]>>(
    candidates: &[G],
    support: &[usize],
    weights: &[f64],
    target: &[f64],
) -> Vec<f64> {
    let mut r = target.to_vec();
    for (&j, &w) in support.iter().zip(weights) {
        for (ri, gi) in r.iter_mut().zip(candidates[j].as_ref()) {
            *ri -= w * gi;
        }
    }
    r
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
