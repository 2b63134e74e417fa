use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Half-width of the cube blob centers are drawn from.
pub const CENTER_BOX: f64 = 10.0;

/// Isotropic Gaussian blobs.
///
/// Centers are drawn uniformly from `[-10, 10]^dim`, then blob `j` contributes
/// `samples_per_blob` points `center_j + stds[j] * eps` with `eps` standard
/// normal per coordinate. Rows are ordered blob by blob and labelled with the
/// blob index.
pub fn make_blobs(
    num_blobs: usize,
    dim: usize,
    stds: &[f64],
    samples_per_blob: usize,
    seed: u64,
) -> Result<Dataset> {
    if dim == 0 {
        return Err(Error::config("blobs: dim must be positive"));
    }
    if stds.is_empty() || num_blobs == 0 {
        return Err(Error::config("blobs: need at least one blob and one std"));
    }
    if stds.len() != num_blobs {
        return Err(Error::config(format!(
            "blobs: {} stds given for {} blobs",
            stds.len(),
            num_blobs
        )));
    }
    if let Some(s) = stds.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::config(format!("blobs: invalid std {s}")));
    }
    if samples_per_blob == 0 {
        return Err(Error::config("blobs: samples_per_blob must be positive"));
    }

    let mut rng = seed::rng(seed);
    let centers: Vec<f64> = (0..num_blobs * dim)
        .map(|_| rng.random_range(-CENTER_BOX..=CENTER_BOX))
        .collect();

    let n = num_blobs * samples_per_blob;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (j, &std) in stds.iter().enumerate() {
        let center = &centers[j * dim..(j + 1) * dim];
        for _ in 0..samples_per_blob {
            for &c in center {
                let eps: f64 = rng.sample(StandardNormal);
                features.push(c + std * eps);
            }
            labels.push(j);
        }
    }
    Dataset::new(features, labels, dim, num_blobs)
}

/// `count` standard deviations evenly spaced over `[lo, hi]`.
pub fn spread_stds(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motivating_shape() {
        let stds = spread_stds(10, 1.0, 8.0);
        assert_eq!(stds.first(), Some(&1.0));
        assert_eq!(stds.last(), Some(&8.0));
        let ds = make_blobs(10, 10, &stds, 50, 1).unwrap();
        assert_eq!(ds.len(), 500);
        assert_eq!(ds.dim(), 10);
        assert_eq!(ds.num_classes(), 10);
        assert_eq!(ds.class_counts(), vec![50; 10]);
    }

    #[test]
    fn zero_std_points_sit_on_center() {
        let ds = make_blobs(2, 2, &[0.0, 0.0], 5, 3).unwrap();
        for class in 0..2 {
            let idx = ds.class_indices(class);
            let first = ds.row(idx[0]).to_vec();
            assert!(first.iter().all(|c| c.abs() <= CENTER_BOX));
            for &i in &idx {
                assert_eq!(ds.row(i), &first[..]);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_blobs(3, 4, &[1.0, 2.0, 3.0], 20, 11).unwrap();
        let b = make_blobs(3, 4, &[1.0, 2.0, 3.0], 20, 11).unwrap();
        assert_eq!(a, b);
        let c = make_blobs(3, 4, &[1.0, 2.0, 3.0], 20, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(make_blobs(2, 0, &[1.0, 1.0], 5, 0), Err(Error::Config(_))));
        assert!(matches!(make_blobs(2, 2, &[], 5, 0), Err(Error::Config(_))));
        assert!(matches!(make_blobs(2, 2, &[1.0], 5, 0), Err(Error::Config(_))));
        assert!(matches!(make_blobs(1, 2, &[-1.0], 5, 0), Err(Error::Config(_))));
    }
}
