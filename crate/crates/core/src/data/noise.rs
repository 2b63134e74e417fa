//! Noise injectors. Each one returns a new value and marks every touched row
//! in `clean_flags`.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ClientChunk, Dataset};
use crate::error::{Error, Result};
use crate::{round_count, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    ClosedSet,
    OpenSet,
    Attribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub ratio: f64,
    /// Standard deviation multiplier for attribute noise.
    #[serde(default)]
    pub severity: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        check_ratio(self.ratio)?;
        if !(self.severity.is_finite() && self.severity >= 0.0) {
            return Err(Error::config(format!(
                "noise.severity must be >= 0 (got {})",
                self.severity
            )));
        }
        Ok(())
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config(format!("noise.ratio must lie in [0, 1] (got {ratio})")));
    }
    Ok(())
}

/// Flips the labels of `round(ratio * n)` rows, chosen uniformly without
/// replacement, to a uniformly drawn different class.
pub fn inject_closed_set(chunk: &ClientChunk, ratio: f64, seed: u64) -> Result<ClientChunk> {
    check_ratio(ratio)?;
    let num_classes = chunk.dataset.num_classes();
    if ratio > 0.0 && num_classes < 2 {
        return Err(Error::config("closed-set noise needs at least two classes"));
    }
    let mut out = chunk.clone();
    let n = chunk.len();
    let count = round_count(ratio * n as f64);
    let mut rng = seed::rng(seed);
    for i in index::sample(&mut rng, n, count).into_vec() {
        let old = out.dataset.label(i);
        let mut new = rng.random_range(0..num_classes - 1);
        if new >= old {
            new += 1;
        }
        out.dataset.set_label(i, new);
        out.clean_flags[i] = false;
    }
    Ok(out)
}

/// Adds `severity * eps` (standard normal per coordinate) to the features of
/// `round(ratio * n)` rows. Labels are left alone.
pub fn inject_attribute(chunk: &ClientChunk, ratio: f64, severity: f64, seed: u64) -> Result<ClientChunk> {
    NoiseSpec {
        kind: NoiseKind::Attribute,
        ratio,
        severity,
    }
    .validate()?;
    let mut out = chunk.clone();
    let count = round_count(ratio * chunk.len() as f64);
    let mut rng = seed::rng(seed);
    for i in index::sample(&mut rng, chunk.len(), count).into_vec() {
        for v in out.dataset.row_mut(i) {
            let eps: f64 = rng.sample(StandardNormal);
            *v += severity * eps;
        }
        out.clean_flags[i] = false;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OpenSetOutcome {
    pub chunks: Vec<ClientChunk>,
    pub test: Dataset,
    pub val: Dataset,
    /// Original ids of the surviving classes; position = new compact id.
    pub kept_classes: Vec<usize>,
}

/// Marks `ceil(ratio * |Y|)` classes as out-of-task.
///
/// Training rows of removed classes keep their features, get a label drawn
/// uniformly from the surviving classes and are flagged noisy. Test and
/// validation sets drop removed-class rows. All labels are renumbered into
/// `0..kept_classes.len()`.
pub fn inject_open_set(
    chunks: &[ClientChunk],
    test: &Dataset,
    val: &Dataset,
    ratio: f64,
    seed: u64,
) -> Result<OpenSetOutcome> {
    check_ratio(ratio)?;
    let num_classes = test.num_classes();
    if chunks.iter().any(|c| c.dataset.num_classes() != num_classes) || val.num_classes() != num_classes {
        return Err(Error::domain("open-set noise: inconsistent class counts"));
    }
    // guard against products like 0.7 * 10 = 7.000000000000001
    let removed_count = (ratio * num_classes as f64 - 1e-9).ceil().max(0.0) as usize;
    if removed_count >= num_classes {
        return Err(Error::config(format!(
            "open-set ratio {ratio} would remove all {num_classes} classes"
        )));
    }

    let mut rng = seed::rng(seed);
    let mut removed = vec![false; num_classes];
    for c in index::sample(&mut rng, num_classes, removed_count).into_vec() {
        removed[c] = true;
    }
    let kept_classes: Vec<usize> = (0..num_classes).filter(|&c| !removed[c]).collect();
    let kept = kept_classes.len();
    let mut compact = vec![usize::MAX; num_classes];
    for (new, &old) in kept_classes.iter().enumerate() {
        compact[old] = new;
    }

    let mut out_chunks = Vec::with_capacity(chunks.len());
    for chunk in chunks {
        let mut c = chunk.clone();
        let mut labels = Vec::with_capacity(c.len());
        for i in 0..c.len() {
            let old = c.dataset.label(i);
            if removed[old] {
                labels.push(rng.random_range(0..kept));
                c.clean_flags[i] = false;
            } else {
                labels.push(compact[old]);
            }
        }
        c.dataset.replace_labels(labels, kept);
        out_chunks.push(c);
    }

    let filter = |ds: &Dataset| {
        let keep: Vec<usize> = (0..ds.len()).filter(|&i| !removed[ds.label(i)]).collect();
        let mut sub = ds.subset(&keep);
        sub.relabel(|l| compact[l], kept);
        sub
    };

    Ok(OpenSetOutcome {
        chunks: out_chunks,
        test: filter(test),
        val: filter(val),
        kept_classes,
    })
}
