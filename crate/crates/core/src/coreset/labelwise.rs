use std::collections::BTreeMap;

use super::omp::omp_select;
use super::{ClassSelection, Coreset, SelectionConfig};
use crate::data::ClientChunk;
use crate::error::{Error, Result};
use crate::model::{per_sample_last_layer_grads, ClassGradientRows, ParamVector};

/// Splits `budget` across classes.
///
/// `classes` lists `(class, size)`. Every class gets `floor(budget / k)` and
/// the remainder goes one each to the largest classes (ties: lower class id).
/// When that would exceed a class's size the class is capped and the excess
/// is spread evenly over the rest the same way, so uncapped classes never
/// differ by more than one. The result sums to `min(budget, total size)`.
pub fn class_budgets(classes: &[(usize, usize)], budget: usize) -> BTreeMap<usize, usize> {
    let total: usize = classes.iter().map(|&(_, n)| n).sum();
    let budget = budget.min(total);
    let filled = |level: usize| classes.iter().map(|&(_, n)| n.min(level)).sum::<usize>();
    // highest common level that fits
    let (mut lo, mut hi) = (0, classes.iter().map(|&(_, n)| n).max().unwrap_or(0));
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if filled(mid) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut alloc: BTreeMap<usize, usize> = classes.iter().map(|&(c, n)| (c, n.min(lo))).collect();
    let mut spare: Vec<(usize, usize)> = classes.iter().copied().filter(|&(_, n)| n > lo).collect();
    spare.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(c, _) in spare.iter().take(budget - filled(lo)) {
        *alloc.get_mut(&c).expect("class listed") += 1;
    }
    alloc
}

/// One OMP instance per class shared between the chunk and the server rows.
///
/// For class `y` the candidates are row `y` of each class-`y` sample's
/// output-layer gradient and the target is the server's row for `y`.
/// Classes the server did not send are skipped and their share of the budget
/// goes to the remaining classes.
pub fn labelwise_omp_select(
    chunk: &ClientChunk,
    params: &ParamVector,
    server_rows: &ClassGradientRows,
    budget: usize,
    cfg: &SelectionConfig,
) -> Result<Coreset> {
    cfg.validate()?;
    let counts = chunk.dataset.class_counts();
    let shared: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .filter(|&(c, &n)| n > 0 && server_rows.get(c).is_some())
        .map(|(c, &n)| (c, n))
        .collect();
    if shared.is_empty() {
        return Err(Error::domain(format!(
            "client {} shares no class with the server broadcast",
            chunk.client_id
        )));
    }

    let grads = per_sample_last_layer_grads(params, &chunk.dataset)?;
    let mut per_class = BTreeMap::new();
    let mut coreset = Coreset::default();
    for (class, class_budget) in class_budgets(&shared, budget) {
        if class_budget == 0 {
            per_class.insert(class, ClassSelection::default());
            continue;
        }
        let members = chunk.dataset.class_indices(class);
        let candidates: Vec<&[f64]> = members.iter().map(|&i| grads[i].row(class)).collect();
        let target = server_rows.get(class).expect("shared classes have a row");
        let sel = omp_select(&candidates, target, &cfg.omp_params(class_budget))?;
        let indices: Vec<usize> = sel.indices.iter().map(|&j| members[j]).collect();
        coreset.indices.extend_from_slice(&indices);
        coreset.weights.extend_from_slice(&sel.weights);
        per_class.insert(
            class,
            ClassSelection {
                indices,
                weights: sel.weights,
            },
        );
    }
    coreset.per_class = Some(per_class);
    Ok(coreset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, Dataset};
    use crate::model::{init_params, labelwise_validation_grads, ModelSpec};

    #[test]
    fn remainder_goes_to_largest_classes() {
        let classes = [(0, 10), (1, 50), (2, 20), (3, 40), (4, 30)];
        let b = class_budgets(&classes, 12);
        assert_eq!(b.values().sum::<usize>(), 12);
        assert_eq!(b[&1], 3);
        assert_eq!(b[&3], 3);
        assert_eq!(b[&0], 2);
        assert_eq!(b[&2], 2);
        assert_eq!(b[&4], 2);
    }

    #[test]
    fn overflow_is_redistributed() {
        let b = class_budgets(&[(0, 1), (1, 10), (2, 2)], 9);
        assert_eq!(b[&0], 1);
        assert_eq!(b[&2], 2);
        assert_eq!(b[&1], 6);
        let capped = class_budgets(&[(0, 1), (1, 2)], 10);
        assert_eq!(capped.values().sum::<usize>(), 3);
    }

    fn setup(classes: usize) -> (ClientChunk, ParamVector, ClassGradientRows) {
        let ds = make_blobs(classes, 3, &vec![1.0; classes], 20, 2).unwrap();
        let params = init_params(&ModelSpec::softmax_regression(3, classes), 1).unwrap();
        let rows = labelwise_validation_grads(&params, &ds).unwrap();
        (ClientChunk::new(0, ds), params, rows)
    }

    #[test]
    fn single_class_client_spends_whole_budget() {
        let (chunk, params, rows) = setup(3);
        let only = ClientChunk::new(0, chunk.dataset.subset(&chunk.dataset.class_indices(2)));
        let cs = labelwise_omp_select(&only, &params, &rows, 7, &SelectionConfig::default()).unwrap();
        assert_eq!(cs.len(), 7);
        let per_class = cs.per_class.unwrap();
        assert_eq!(per_class.len(), 1);
        assert_eq!(per_class[&2].indices.len(), 7);
    }

    #[test]
    fn union_matches_per_class_and_budget() {
        let (chunk, params, rows) = setup(5);
        let cs = labelwise_omp_select(&chunk, &params, &rows, 12, &SelectionConfig::default()).unwrap();
        assert_eq!(cs.len(), 12);
        let per_class = cs.per_class.as_ref().unwrap();
        assert_eq!(per_class.values().map(|s| s.indices.len()).sum::<usize>(), 12);
        for (class, sel) in per_class {
            assert!(sel.indices.iter().all(|&i| chunk.dataset.label(i) == *class));
            assert!(sel.weights.iter().all(|&w| w >= 0.0));
        }
        let mut sorted = cs.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 12);
    }

    #[test]
    fn candidate_rows_are_narrower_than_full_gradient() {
        let (_, params, rows) = setup(4);
        assert_eq!(rows.width(), 4);
        assert!(rows.width() < params.spec().last_layer_range().len());
    }

    #[test]
    fn missing_server_class_is_skipped() {
        let (chunk, params, _) = setup(3);
        let val = chunk.dataset.subset(&chunk.dataset.class_indices(0));
        let rows = labelwise_validation_grads(&params, &val).unwrap();
        let cs = labelwise_omp_select(&chunk, &params, &rows, 6, &SelectionConfig::default()).unwrap();
        assert_eq!(cs.len(), 6);
        assert!(cs.indices.iter().all(|&i| chunk.dataset.label(i) == 0));
    }

    #[test]
    fn no_shared_class_is_an_error() {
        let (chunk, params, _) = setup(3);
        let val = chunk.dataset.subset(&chunk.dataset.class_indices(0));
        let rows = labelwise_validation_grads(&params, &val).unwrap();
        let other = ClientChunk::new(1, chunk.dataset.subset(&chunk.dataset.class_indices(1)));
        assert!(matches!(
            labelwise_omp_select(&other, &params, &rows, 3, &SelectionConfig::default()),
            Err(Error::Domain(_))
        ));
        let empty = ClientChunk::new(2, Dataset::empty(3, 3));
        let all = labelwise_validation_grads(&params, &chunk.dataset).unwrap();
        assert!(labelwise_omp_select(&empty, &params, &all, 3, &SelectionConfig::default()).is_err());
    }
}
