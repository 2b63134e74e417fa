use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Coreset;
use crate::data::ClientChunk;

/// Facility-location result with the marginal gain of every pick.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilitySelection {
    pub coreset: Coreset,
    pub gains: Vec<f64>,
}

struct Features {
    unit: Vec<f64>,
    dim: usize,
    n: usize,
}

impl Features {
    fn new(chunk: &ClientChunk) -> Self {
        let ds = &chunk.dataset;
        let dim = ds.dim();
        let mut unit = Vec::with_capacity(ds.features().len());
        for (x, _) in ds.rows() {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                unit.extend(x.iter().map(|v| v / norm));
            } else {
                unit.extend(std::iter::repeat_n(0.0, dim));
            }
        }
        Self { unit, dim, n: ds.len() }
    }

    /// `(1 + cos) / 2`; a zero vector has cosine 0 with everything.
    fn sim(&self, a: usize, b: usize) -> f64 {
        let x = &self.unit[a * self.dim..(a + 1) * self.dim];
        let y = &self.unit[b * self.dim..(b + 1) * self.dim];
        let cos: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        0.5 * (1.0 + cos)
    }

    fn gain(&self, s: usize, cover: &[f64]) -> f64 {
        (0..self.n).map(|v| (self.sim(v, s) - cover[v]).max(0.0)).sum()
    }
}

#[derive(PartialEq)]
struct Bound {
    gain: f64,
    index: usize,
}

impl Eq for Bound {}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy greedy maximisation of `F(S) = sum_v max_{s in S} sim(v, s)`.
///
/// Weights are cluster sizes: the number of chunk rows whose most similar
/// selected row (lowest index on ties) is that element.
pub fn facility_location_greedy(chunk: &ClientChunk, budget: usize) -> FacilitySelection {
    let feats = Features::new(chunk);
    let n = feats.n;
    let budget = budget.min(n);
    let mut cover = vec![0.0; n];
    let mut heap: BinaryHeap<Bound> = (0..n)
        .map(|index| Bound {
            gain: feats.gain(index, &cover),
            index,
        })
        .collect();
    let mut selected = Vec::with_capacity(budget);
    let mut gains = Vec::with_capacity(budget);

    while selected.len() < budget {
        let Some(top) = heap.pop() else { break };
        let fresh = Bound {
            gain: feats.gain(top.index, &cover),
            index: top.index,
        };
        if heap.peek().is_some_and(|next| fresh < *next) {
            heap.push(fresh);
            continue;
        }
        for (v, c) in cover.iter_mut().enumerate() {
            *c = c.max(feats.sim(v, fresh.index));
        }
        selected.push(fresh.index);
        gains.push(fresh.gain);
    }

    let mut weights = vec![0.0; selected.len()];
    if !selected.is_empty() {
        for v in 0..n {
            let mut best = 0;
            for k in 1..selected.len() {
                let (s, b) = (feats.sim(v, selected[k]), feats.sim(v, selected[best]));
                if s > b || (s == b && selected[k] < selected[best]) {
                    best = k;
                }
            }
            weights[best] += 1.0;
        }
    }

    FacilitySelection {
        coreset: Coreset {
            indices: selected,
            weights,
            per_class: None,
        },
        gains,
    }
}

pub fn facility_location_select(chunk: &ClientChunk, budget: usize) -> Coreset {
    facility_location_greedy(chunk, budget).coreset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, Dataset};

    #[test]
    fn identical_points_form_one_cluster() {
        let ds = Dataset::new(vec![1.0, 2.0, 1.0, 2.0], vec![0, 0], 2, 1).unwrap();
        let sel = facility_location_greedy(&ClientChunk::new(0, ds), 1);
        assert_eq!(sel.coreset.indices, vec![0]);
        assert_eq!(sel.coreset.weights, vec![2.0]);
        assert!((sel.gains[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gains_never_increase() {
        let ds = make_blobs(4, 3, &[3.0; 4], 15, 6).unwrap();
        let sel = facility_location_greedy(&ClientChunk::new(0, ds), 12);
        assert_eq!(sel.coreset.len(), 12);
        for w in sel.gains.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert_eq!(sel.coreset.weights.iter().sum::<f64>(), 60.0);
    }

    #[test]
    fn empty_chunk_selects_nothing() {
        let sel = facility_location_select(&ClientChunk::new(0, Dataset::empty(2, 2)), 3);
        assert!(sel.is_empty());
    }
}
