use rand::seq::index;

use super::Coreset;
use crate::data::ClientChunk;
use crate::seed;

/// Uniform sample without replacement, unit weights, indices ascending.
/// Budgets above the chunk size are clamped to it.
pub fn random_select(chunk: &ClientChunk, budget: usize, seed: u64) -> Coreset {
    let n = chunk.len();
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, n, budget.min(n)).into_vec();
    picked.sort_unstable();
    Coreset::uniform(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{inject_closed_set, make_blobs};

    fn chunk() -> ClientChunk {
        ClientChunk::new(0, make_blobs(5, 2, &[1.0; 5], 20, 1).unwrap())
    }

    #[test]
    fn full_budget_takes_all() {
        let c = chunk();
        assert_eq!(random_select(&c, 100, 3).indices, (0..100).collect::<Vec<_>>());
        assert_eq!(random_select(&c, 500, 3).len(), 100);
    }

    #[test]
    fn deterministic_per_seed() {
        let c = chunk();
        assert_eq!(random_select(&c, 10, 3), random_select(&c, 10, 3));
        assert_ne!(random_select(&c, 10, 3), random_select(&c, 10, 4));
    }

    #[test]
    fn clean_fraction_tracks_noise_rate() {
        let noisy = inject_closed_set(&chunk(), 0.4, 7).unwrap();
        let mut total = 0.0;
        for s in 0..200 {
            let cs = random_select(&noisy, 10, s);
            let clean = cs.indices.iter().filter(|&&i| noisy.clean_flags[i]).count();
            total += clean as f64 / cs.len() as f64;
        }
        let mean = total / 200.0;
        assert!((mean - 0.6).abs() <= 0.05, "mean clean fraction {mean}");
    }
}
