//! Datasets, splits, non-IID partitioning and noise injection.

mod blobs;
mod csv_io;
mod noise;
mod partition;
mod split;

pub use blobs::{make_blobs, spread_stds};
pub use csv_io::{read_csv, write_csv};
pub use noise::{
    inject_attribute, inject_closed_set, inject_open_set, NoiseKind, NoiseSpec, OpenSetOutcome,
};
pub use partition::dirichlet_partition;
pub use split::{split_train_val_test, Splits};

use crate::error::{Error, Result};

/// A labelled feature matrix stored row-major.
///
/// Empty datasets are representable (validation or test splits of size
/// zero), but the feature dimension and class count are always positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        if num_classes == 0 {
            return Err(Error::config("num_classes must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::domain(format!(
                "feature buffer has {} values, expected {} rows x {} columns",
                features.len(),
                labels.len(),
                dim
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::domain(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
        Ok(Self {
            features,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn empty(dim: usize, num_classes: usize) -> Self {
        Self {
            features: Vec::new(),
            labels: Vec::new(),
            dim,
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features
            .chunks_exact(self.dim)
            .zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    /// Indices of the rows labelled `class`.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Appends `other` below `self`. Dimensions and class counts must agree.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim || self.num_classes != other.num_classes {
            return Err(Error::domain("cannot concatenate datasets of different shape"));
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn set_label(&mut self, i: usize, label: usize) {
        debug_assert!(label < self.num_classes);
        self.labels[i] = label;
    }

    pub(crate) fn replace_labels(&mut self, labels: Vec<usize>, num_classes: usize) {
        debug_assert_eq!(labels.len(), self.labels.len());
        debug_assert!(labels.iter().all(|&l| l < num_classes));
        self.labels = labels;
        self.num_classes = num_classes;
    }

    /// Relabels every row through `map` and shrinks the class count.
    pub(crate) fn relabel(&mut self, map: impl Fn(usize) -> usize, num_classes: usize) {
        for l in &mut self.labels {
            *l = map(*l);
            debug_assert!(*l < num_classes);
        }
        self.num_classes = num_classes;
    }
}

/// One client's private data plus ground-truth corruption flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientChunk {
    pub client_id: usize,
    pub dataset: Dataset,
    /// `true` while the row is untouched by any noise injector.
    pub clean_flags: Vec<bool>,
    /// Row index of each sample in the training split it was partitioned from.
    pub origin: Vec<usize>,
}

impl ClientChunk {
    /// Wraps a dataset as an all-clean chunk.
    pub fn new(client_id: usize, dataset: Dataset) -> Self {
        let n = dataset.len();
        Self {
            client_id,
            dataset,
            clean_flags: vec![true; n],
            origin: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn noisy_count(&self) -> usize {
        self.clean_flags.iter().filter(|&&c| !c).count()
    }

    /// Indices of rows still flagged clean.
    pub fn clean_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.clean_flags[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_label() {
        let err = Dataset::new(vec![0.0, 1.0], vec![0, 3], 1, 2).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Dataset::new(vec![f64::NAN], vec![0], 1, 1).is_err());
    }

    #[test]
    fn subset_and_counts() {
        let ds = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], vec![0, 1, 1, 0], 1, 2).unwrap();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.features(), &[2.0, 0.0]);
        assert_eq!(sub.labels(), &[1, 0]);
        assert_eq!(ds.class_counts(), vec![2, 2]);
        assert_eq!(ds.class_indices(1), vec![1, 2]);
    }
}
