use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forward::{check_dims, dot, Pass};
use super::params::{Arch, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Heavy-ball momentum; 0 disables it.
    pub momentum: f64,
    /// L2 penalty added to the gradient as `weight_decay * theta`.
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn plain(lr: f64, batch_size: usize) -> Self {
        Self {
            lr,
            batch_size,
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("learning rate must be > 0 (got {})", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be >= 0"));
        }
        Ok(())
    }
}

/// FedProx proximal term `mu/2 * ||theta - anchor||^2`.
#[derive(Debug, Clone, Copy)]
pub struct Prox<'a> {
    pub mu: f64,
    pub anchor: &'a ParamVector,
}

/// Gradient of the mean cross-entropy over `rows` of `ds` w.r.t. every
/// parameter, in flat layout order. Rows are visited in the order given.
pub fn full_gradient(params: &ParamVector, ds: &Dataset, rows: &[usize]) -> Vec<f64> {
    let spec = *params.spec();
    let v = params.values();
    let mut grad = vec![0.0; v.len()];
    let mut pass = Pass::new(&spec);
    let h_dim = spec.penultimate_dim();
    let (ow, ob) = (spec.output_weight(), spec.output_bias());
    let mut dz = vec![0.0; spec.num_classes];
    let mut dh = vec![0.0; h_dim];

    for &i in rows {
        let x = ds.row(i);
        let y = ds.label(i);
        pass.run(params, x);
        for c in 0..spec.num_classes {
            dz[c] = pass.probs[c] - if c == y { 1.0 } else { 0.0 };
            let row = &mut grad[ow.start + c * h_dim..ow.start + (c + 1) * h_dim];
            for (g, h) in row.iter_mut().zip(&pass.h) {
                *g += dz[c] * h;
            }
            grad[ob.start + c] += dz[c];
        }
        if spec.arch == Arch::OneHidden {
            let w_out = &v[ow.clone()];
            for (k, d) in dh.iter_mut().enumerate() {
                let col: f64 = (0..spec.num_classes).map(|c| w_out[c * h_dim + k] * dz[c]).sum();
                *d = col * (1.0 - pass.h[k] * pass.h[k]);
            }
            let (hw, hb) = (spec.hidden_weight(), spec.hidden_bias());
            for k in 0..h_dim {
                let row = &mut grad[hw.start + k * spec.input_dim..hw.start + (k + 1) * spec.input_dim];
                for (g, xj) in row.iter_mut().zip(x) {
                    *g += dh[k] * xj;
                }
                grad[hb.start + k] += dh[k];
            }
        }
    }
    let scale = 1.0 / rows.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    grad
}

/// Shuffled mini-batch SGD on the mean cross-entropy, plus the proximal term
/// when `prox` is given.
///
/// Each epoch draws a fresh permutation; rows inside a batch are visited in
/// ascending index order so a full batch reproduces [`full_gradient`] exactly.
pub fn sgd_epochs(
    params: &ParamVector,
    ds: &Dataset,
    epochs: usize,
    cfg: &SgdConfig,
    seed: u64,
    prox: Option<Prox<'_>>,
) -> Result<ParamVector> {
    cfg.validate()?;
    check_dims(params, ds)?;
    if epochs == 0 {
        return Ok(params.clone());
    }
    if ds.is_empty() {
        return Err(Error::domain("sgd on an empty dataset"));
    }
    if let Some(p) = &prox {
        if p.anchor.spec() != params.spec() {
            return Err(Error::domain("prox anchor belongs to a different model"));
        }
        if !(p.mu.is_finite() && p.mu >= 0.0) {
            return Err(Error::config("prox mu must be >= 0"));
        }
    }

    let mut theta = params.clone();
    let mut velocity = vec![0.0; theta.len()];
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = seed::rng(seed);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend_from_slice(chunk);
            batch.sort_unstable();
            let mut grad = full_gradient(&theta, ds, &batch);
            if cfg.weight_decay > 0.0 {
                for (g, t) in grad.iter_mut().zip(theta.values()) {
                    *g += cfg.weight_decay * t;
                }
            }
            if let Some(p) = &prox {
                for ((g, t), a) in grad.iter_mut().zip(theta.values()).zip(p.anchor.values()) {
                    *g += p.mu * (t - a);
                }
            }
            let step: &[f64] = if cfg.momentum > 0.0 {
                for (vel, g) in velocity.iter_mut().zip(&grad) {
                    *vel = cfg.momentum * *vel + g;
                }
                &velocity
            } else {
                &grad
            };
            for (t, s) in theta.values_mut().iter_mut().zip(step) {
                *t -= cfg.lr * s;
            }
        }
    }
    debug_assert!(dot(theta.values(), theta.values()).is_finite());
    Ok(theta)
}
