use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{ClientChunk, Dataset};
use crate::error::{Error, Result};
use crate::{round_count, seed};

/// Non-IID split of `ds` across `num_clients` clients.
///
/// For every class a proportion vector is drawn from a symmetric
/// Dirichlet(alpha) (as normalised Gamma(alpha, 1) draws), the class rows are
/// shuffled and cut at `round(cumsum(p) * n_c)`. Clients may end up with no
/// rows at all; downstream code treats such chunks as idle.
pub fn dirichlet_partition(ds: &Dataset, num_clients: usize, alpha: f64, seed: u64) -> Result<Vec<ClientChunk>> {
    if num_clients == 0 {
        return Err(Error::config("dirichlet partition needs at least one client"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(format!("dirichlet alpha must be > 0 (got {alpha})")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config(format!("dirichlet alpha: {e}")))?;
    let mut rng = seed::rng(seed);
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); num_clients];

    for class in 0..ds.num_classes() {
        let mut idx = ds.class_indices(class);
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let mut props: Vec<f64> = (0..num_clients).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = props.iter().sum();
        if total > 0.0 && total.is_finite() {
            props.iter_mut().for_each(|p| *p /= total);
        } else {
            // every draw underflowed: the limit of tiny alpha is a one-hot vector
            props.iter_mut().for_each(|p| *p = 0.0);
            props[rng.random_range(0..num_clients)] = 1.0;
        }

        let n_c = idx.len();
        let mut start = 0;
        let mut cum = 0.0;
        for (client, p) in props.iter().enumerate() {
            cum += p;
            let end = if client + 1 == num_clients {
                n_c
            } else {
                round_count(cum * n_c as f64).clamp(start, n_c)
            };
            assigned[client].extend_from_slice(&idx[start..end]);
            start = end;
        }
    }

    Ok(assigned
        .into_iter()
        .enumerate()
        .map(|(client_id, origin)| {
            let dataset = ds.subset(&origin);
            ClientChunk {
                client_id,
                clean_flags: vec![true; origin.len()],
                dataset,
                origin,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;

    #[test]
    fn single_client_gets_everything() {
        let ds = make_blobs(3, 2, &[1.0; 3], 10, 0).unwrap();
        let chunks = dirichlet_partition(&ds, 1, 0.4, 1).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].len(), 30);
        assert!(chunks[0].clean_flags.iter().all(|&c| c));
    }

    #[test]
    fn huge_alpha_is_nearly_even() {
        let ds = make_blobs(1, 2, &[1.0], 100, 0).unwrap();
        let mut total = 0usize;
        for s in 0..100 {
            let chunks = dirichlet_partition(&ds, 2, 1e6, s).unwrap();
            assert!((chunks[0].len() as i64 - 50).abs() <= 5);
            total += chunks[0].len();
        }
        let mean = total as f64 / 100.0;
        assert!((mean - 50.0).abs() <= 1.0, "mean {mean}");
    }

    #[test]
    fn small_alpha_skews_histograms() {
        let ds = make_blobs(10, 2, &[1.0; 10], 100, 0).unwrap();
        let chunks = dirichlet_partition(&ds, 10, 0.4, 3).unwrap();
        let mut skewed = 0;
        for c in chunks.iter().filter(|c| !c.is_empty()) {
            let counts = c.dataset.class_counts();
            let max = *counts.iter().max().unwrap() as f64;
            if max / c.len() as f64 > 0.1 {
                skewed += 1;
            }
        }
        assert!(skewed >= 8, "only {skewed} skewed clients");
    }

    #[test]
    fn tiny_alpha_does_not_lose_rows() {
        let ds = make_blobs(4, 2, &[1.0; 4], 25, 0).unwrap();
        let chunks = dirichlet_partition(&ds, 5, 1e-4, 2).unwrap();
        assert_eq!(chunks.iter().map(ClientChunk::len).sum::<usize>(), 100);
    }

    #[test]
    fn rejects_bad_arguments() {
        let ds = make_blobs(1, 1, &[1.0], 4, 0).unwrap();
        assert!(dirichlet_partition(&ds, 0, 1.0, 0).is_err());
        assert!(dirichlet_partition(&ds, 2, 0.0, 0).is_err());
    }
}
