use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    #[default]
    SoftmaxRegression,
    OneHidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input_dim: usize,
    /// Ignored for softmax regression.
    pub hidden_dim: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn softmax_regression(input_dim: usize, num_classes: usize) -> Self {
        Self {
            arch: Arch::SoftmaxRegression,
            input_dim,
            hidden_dim: 0,
            num_classes,
        }
    }

    pub fn one_hidden(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            arch: Arch::OneHidden,
            input_dim,
            hidden_dim,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::config("model dimensions must be positive"));
        }
        if self.arch == Arch::OneHidden && self.hidden_dim == 0 {
            return Err(Error::config("model.hidden_dim must be positive for one_hidden"));
        }
        Ok(())
    }

    /// Width `h` of the features feeding the output layer.
    pub fn penultimate_dim(&self) -> usize {
        match self.arch {
            Arch::SoftmaxRegression => self.input_dim,
            Arch::OneHidden => self.hidden_dim,
        }
    }

    /// Length of one output-layer row including its bias: `h + 1`.
    pub fn row_width(&self) -> usize {
        self.penultimate_dim() + 1
    }

    /// Ordered `(name, shape)` slices of the flat parameter vector.
    pub fn layout(&self) -> Vec<LayerSlice> {
        let mut shapes: Vec<(&'static str, Vec<usize>)> = Vec::new();
        if self.arch == Arch::OneHidden {
            shapes.push(("hidden.weight", vec![self.hidden_dim, self.input_dim]));
            shapes.push(("hidden.bias", vec![self.hidden_dim]));
        }
        shapes.push(("output.weight", vec![self.num_classes, self.penultimate_dim()]));
        shapes.push(("output.bias", vec![self.num_classes]));

        let mut offset = 0;
        shapes
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                let slice = LayerSlice {
                    name,
                    shape,
                    offset,
                    len,
                };
                offset += len;
                slice
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layout().iter().map(|s| s.len).sum()
    }

    /// Output-layer weights and biases: `|Y| * (h + 1)` entries at the end.
    pub fn last_layer_range(&self) -> Range<usize> {
        let total = self.num_params();
        total - self.num_classes * self.row_width()..total
    }

    pub(crate) fn hidden_weight(&self) -> Range<usize> {
        0..self.hidden_dim * self.input_dim
    }

    pub(crate) fn hidden_bias(&self) -> Range<usize> {
        let start = self.hidden_dim * self.input_dim;
        start..start + self.hidden_dim
    }

    pub(crate) fn output_weight(&self) -> Range<usize> {
        let start = self.last_layer_range().start;
        start..start + self.num_classes * self.penultimate_dim()
    }

    pub(crate) fn output_bias(&self) -> Range<usize> {
        let end = self.num_params();
        end - self.num_classes..end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlice {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Flat model parameters tagged with the architecture they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    spec: ModelSpec,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(spec: ModelSpec) -> Self {
        Self {
            values: vec![0.0; spec.num_params()],
            spec,
        }
    }

    pub fn from_values(spec: ModelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.num_params() {
            return Err(Error::domain(format!(
                "{} values given for a model with {} parameters",
                values.len(),
                spec.num_params()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_layer(&self) -> &[f64] {
        &self.values[self.spec.last_layer_range()]
    }

    /// `self - other`.
    pub fn delta_from(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_same_shape(other)?;
        Ok(Self {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &ParamVector) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_same_shape(&self, other: &ParamVector) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::domain("parameter vectors belong to different models"));
        }
        Ok(())
    }
}

/// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let mut params = ParamVector::zeros(*spec);
    for slice in spec.layout() {
        if slice.shape.len() != 2 {
            continue;
        }
        let bound = 1.0 / (slice.shape[1] as f64).sqrt();
        for v in &mut params.values[slice.offset..slice.offset + slice.len] {
            *v = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}
