use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::forward::{check_dims, Pass};
use super::params::ParamVector;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Gradient of the loss w.r.t. the output layer, one row per class.
///
/// Row `c` holds the derivatives for the weights from every penultimate unit
/// into logit `c`, followed by the derivative for bias `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastLayerGradient {
    num_classes: usize,
    width: usize,
    values: Vec<f64>,
}

impl LastLayerGradient {
    pub fn zeros(num_classes: usize, width: usize) -> Self {
        Self {
            num_classes,
            width,
            values: vec![0.0; num_classes * width],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Row width `h + 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.values[class * self.width..(class + 1) * self.width]
    }

    /// All rows back to back.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reorders into the flat parameter layout of the output layer
    /// (all weights row-major, then all biases).
    pub fn to_param_order(&self) -> Vec<f64> {
        let h = self.width - 1;
        let mut out = Vec::with_capacity(self.values.len());
        for c in 0..self.num_classes {
            out.extend_from_slice(&self.row(c)[..h]);
        }
        out.extend((0..self.num_classes).map(|c| self.row(c)[h]));
        out
    }

    fn accumulate(&mut self, other: &LastLayerGradient) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }
}

fn sample_gradient(pass: &Pass, label: usize) -> LastLayerGradient {
    let width = pass.h.len() + 1;
    let num_classes = pass.probs.len();
    let mut g = LastLayerGradient::zeros(num_classes, width);
    for c in 0..num_classes {
        let coef = pass.probs[c] - if c == label { 1.0 } else { 0.0 };
        let row = &mut g.values[c * width..(c + 1) * width];
        for (r, h) in row.iter_mut().zip(&pass.h) {
            *r = coef * h;
        }
        row[width - 1] = coef;
    }
    g
}

/// One output-layer gradient per row of `ds`.
pub fn per_sample_last_layer_grads(params: &ParamVector, ds: &Dataset) -> Result<Vec<LastLayerGradient>> {
    check_dims(params, ds)?;
    let mut pass = Pass::new(params.spec());
    Ok(ds
        .rows()
        .map(|(x, y)| {
            pass.run(params, x);
            sample_gradient(&pass, y)
        })
        .collect())
}

/// Average of [`per_sample_last_layer_grads`], summed in row order.
pub fn mean_last_layer_grad(params: &ParamVector, ds: &Dataset) -> Result<LastLayerGradient> {
    if ds.is_empty() {
        return Err(Error::domain("mean gradient of an empty dataset"));
    }
    let spec = params.spec();
    let mut mean = LastLayerGradient::zeros(spec.num_classes, spec.row_width());
    for g in per_sample_last_layer_grads(params, ds)? {
        mean.accumulate(&g);
    }
    mean.scale(1.0 / ds.len() as f64);
    Ok(mean)
}

/// Per-class validation gradient rows broadcast for label-wise selection.
///
/// Entry `y` is row `y` of the mean output-layer gradient over the
/// validation rows labelled `y`. Classes without validation rows are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGradientRows {
    num_classes: usize,
    width: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl ClassGradientRows {
    pub fn new(num_classes: usize, width: usize, rows: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        if rows.iter().any(|(&c, r)| c >= num_classes || r.len() != width) {
            return Err(Error::domain("class gradient row out of shape"));
        }
        Ok(Self {
            num_classes,
            width,
            rows,
        })
    }

    pub fn get(&self, class: usize) -> Option<&[f64]> {
        self.rows.get(&class).map(Vec::as_slice)
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of reals carried, i.e. the broadcast size.
    pub fn value_count(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }
}

pub fn labelwise_validation_grads(params: &ParamVector, val: &Dataset) -> Result<ClassGradientRows> {
    check_dims(params, val)?;
    if val.is_empty() {
        return Err(Error::domain("validation set is empty"));
    }
    let spec = params.spec();
    let mut rows = BTreeMap::new();
    for class in 0..spec.num_classes {
        let idx = val.class_indices(class);
        if idx.is_empty() {
            continue;
        }
        let mean = mean_last_layer_grad(params, &val.subset(&idx))?;
        rows.insert(class, mean.row(class).to_vec());
    }
    ClassGradientRows::new(spec.num_classes, spec.row_width(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;
    use crate::model::{init_params, loss, ModelSpec};

    #[test]
    fn confident_correct_sample_has_zero_gradient() {
        // logits so large that softmax saturates to exactly one-hot
        let spec = ModelSpec::softmax_regression(1, 2);
        let params = ParamVector::from_values(spec, vec![1000.0, -1000.0, 0.0, 0.0]).unwrap();
        let ds = Dataset::new(vec![1.0], vec![0], 1, 2).unwrap();
        let g = &per_sample_last_layer_grads(&params, &ds).unwrap()[0];
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_is_average_of_samples() {
        let ds = make_blobs(3, 2, &[1.0; 3], 6, 1).unwrap();
        let params = init_params(&ModelSpec::one_hidden(2, 3, 3), 2).unwrap();
        let per = per_sample_last_layer_grads(&params, &ds).unwrap();
        let mean = mean_last_layer_grad(&params, &ds).unwrap();
        for k in 0..mean.values().len() {
            let mut s = 0.0;
            for g in &per {
                s += g.values()[k];
            }
            assert_eq!(mean.values()[k], s * (1.0 / ds.len() as f64));
        }
    }

    #[test]
    fn single_sample_and_duplicated_dataset() {
        let ds = make_blobs(2, 3, &[1.0; 2], 4, 1).unwrap();
        let params = init_params(&ModelSpec::softmax_regression(3, 2), 2).unwrap();
        let one = ds.subset(&[3]);
        assert_eq!(
            mean_last_layer_grad(&params, &one).unwrap(),
            per_sample_last_layer_grads(&params, &one).unwrap()[0]
        );
        let doubled = ds.concat(&ds).unwrap();
        let a = mean_last_layer_grad(&params, &ds).unwrap();
        let b = mean_last_layer_grad(&params, &doubled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_on_exactly_fitted_data() {
        let spec = ModelSpec::softmax_regression(2, 2);
        let params = ParamVector::from_values(spec, vec![900.0, 0.0, 0.0, 900.0, 0.0, 0.0]).unwrap();
        let ds = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], vec![0, 1], 2, 2).unwrap();
        assert!(loss(&params, &ds).unwrap() < 1e-300);
        let g = mean_last_layer_grad(&params, &ds).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn labelwise_rows_match_class_filtered_means() {
        let ds = make_blobs(4, 3, &[1.0; 4], 5, 1).unwrap();
        let params = init_params(&ModelSpec::one_hidden(3, 5, 4), 2).unwrap();
        let rows = labelwise_validation_grads(&params, &ds).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.value_count(), 4 * 6);
        assert_eq!(rows.value_count(), params.spec().last_layer_range().len());
        for c in 0..4 {
            let sub = ds.subset(&ds.class_indices(c));
            let mean = mean_last_layer_grad(&params, &sub).unwrap();
            assert_eq!(rows.get(c).unwrap(), mean.row(c));
        }
    }

    #[test]
    fn labelwise_single_class_has_one_entry() {
        let ds = make_blobs(3, 2, &[1.0; 3], 4, 1).unwrap();
        let only = ds.subset(&ds.class_indices(1));
        let params = init_params(&ModelSpec::softmax_regression(2, 3), 0).unwrap();
        let rows = labelwise_validation_grads(&params, &only).unwrap();
        assert_eq!(rows.classes().collect::<Vec<_>>(), vec![1]);
        assert!(rows.get(0).is_none());
    }

    #[test]
    fn param_order_matches_layout() {
        let g = LastLayerGradient {
            num_classes: 2,
            width: 3,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        assert_eq!(g.to_param_order(), vec![1.0, 2.0, 4.0, 5.0, 3.0, 6.0]);
    }
}
