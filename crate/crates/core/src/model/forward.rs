use super::params::{Arch, ModelSpec, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Scratch buffers for one forward pass.
pub(crate) struct Pass {
    /// Penultimate features `h(x)` (without the bias 1).
    pub h: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Pass {
    pub fn new(spec: &ModelSpec) -> Self {
        Self {
            h: vec![0.0; spec.penultimate_dim()],
            logits: vec![0.0; spec.num_classes],
            probs: vec![0.0; spec.num_classes],
        }
    }

    pub fn run(&mut self, params: &ParamVector, x: &[f64]) {
        let spec = params.spec();
        let v = params.values();
        match spec.arch {
            Arch::SoftmaxRegression => self.h.copy_from_slice(x),
            Arch::OneHidden => {
                let w = &v[spec.hidden_weight()];
                let b = &v[spec.hidden_bias()];
                for (k, h) in self.h.iter_mut().enumerate() {
                    let row = &w[k * spec.input_dim..(k + 1) * spec.input_dim];
                    *h = (dot(row, x) + b[k]).tanh();
                }
            }
        }
        let width = spec.penultimate_dim();
        let w = &v[spec.output_weight()];
        let b = &v[spec.output_bias()];
        for (c, z) in self.logits.iter_mut().enumerate() {
            *z = dot(&w[c * width..(c + 1) * width], &self.h) + b[c];
        }
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, z) in self.probs.iter_mut().zip(&self.logits) {
            *p = (z - max).exp();
            sum += *p;
        }
        self.probs.iter_mut().for_each(|p| *p /= sum);
    }

    /// Cross-entropy of the last pass against `label`.
    pub fn sample_loss(&self, label: usize) -> f64 {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + self.logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        lse - self.logits[label]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dims(params: &ParamVector, ds: &Dataset) -> Result<()> {
    let spec = params.spec();
    if ds.dim() != spec.input_dim || ds.num_classes() != spec.num_classes {
        return Err(Error::domain(format!(
            "dataset shape ({} features, {} classes) does not match model ({} inputs, {} classes)",
            ds.dim(),
            ds.num_classes(),
            spec.input_dim,
            spec.num_classes
        )));
    }
    Ok(())
}

/// Class probabilities for one input.
pub fn predict_proba(params: &ParamVector, x: &[f64]) -> Vec<f64> {
    let mut pass = Pass::new(params.spec());
    pass.run(params, x);
    pass.probs
}

/// Arg-max class; ties go to the lowest class id.
pub fn predict(params: &ParamVector, x: &[f64]) -> usize {
    let mut pass = Pass::new(params.spec());
    pass.run(params, x);
    argmax(&pass.logits)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `ds`.
pub fn loss(params: &ParamVector, ds: &Dataset) -> Result<f64> {
    check_dims(params, ds)?;
    if ds.is_empty() {
        return Err(Error::domain("loss of an empty dataset"));
    }
    let mut pass = Pass::new(params.spec());
    let mut total = 0.0;
    for (x, y) in ds.rows() {
        pass.run(params, x);
        total += pass.sample_loss(y);
    }
    Ok(total / ds.len() as f64)
}
