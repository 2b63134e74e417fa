use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::{round_count, seed};

/// Train, validation and test parts of one dataset plus the source row of
/// every part's rows.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub train_origin: Vec<usize>,
    pub val_origin: Vec<usize>,
    pub test_origin: Vec<usize>,
}

/// Stratified three-way split.
///
/// Within each class the rows are shuffled, then `round(test_frac * n_c)`
/// go to test, `round(val_frac * n_c)` to validation and the rest to
/// training. Each part lists its rows class by class.
pub fn split_train_val_test(ds: &Dataset, val_frac: f64, test_frac: f64, seed: u64) -> Result<Splits> {
    let in_unit = |f: f64| f.is_finite() && (0.0..1.0).contains(&f);
    if !in_unit(val_frac) || !in_unit(test_frac) || val_frac + test_frac >= 1.0 {
        return Err(Error::config(format!(
            "split fractions must be >= 0 with val_frac + test_frac < 1 (got {val_frac}, {test_frac})"
        )));
    }
    let mut rng = seed::rng(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for class in 0..ds.num_classes() {
        let mut idx = ds.class_indices(class);
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n_c = idx.len() as f64;
        let n_test = round_count(test_frac * n_c).min(idx.len());
        let n_val = round_count(val_frac * n_c).min(idx.len() - n_test);
        test.extend_from_slice(&idx[..n_test]);
        val.extend_from_slice(&idx[n_test..n_test + n_val]);
        train.extend_from_slice(&idx[n_test + n_val..]);
    }
    Ok(Splits {
        train: ds.subset(&train),
        val: ds.subset(&val),
        test: ds.subset(&test),
        train_origin: train,
        val_origin: val,
        test_origin: test,
    })
}
