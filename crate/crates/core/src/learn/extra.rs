//! Extremely randomized trees for feature importance, plus the
//! mean-importance selection rule.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeding::seeded_rng;
use crate::telemetry::SubjectId;

use super::tree::{grow, GrowSpec, SplitStrategy};
use super::{class_index, LearnError, LearnParams};

/// Per-column mean impurity decrease, normalized to sum 1 (all zero when no
/// split ever happened).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(pub Vec<f64>);

impl ImportanceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Fits `params.n_estimators` extremely randomized trees (no bootstrap,
/// uniform-random thresholds) and returns normalized per-column importance.
pub fn extra_trees_importance(
    x: ArrayView2<'_, f64>,
    y: &[SubjectId],
    params: &LearnParams,
    seed: u64,
) -> Result<ImportanceVector, LearnError> {
    let (y_idx, classes) = class_index(x, y)?;
    let n = x.nrows();
    let d = x.ncols();
    let k_features = params.max_features.count(d);

    let per_tree: Vec<Vec<f64>> = (0..params.n_estimators)
        .into_par_iter()
        .map(|tree_index| {
            let mut rng = seeded_rng(seed, tree_index as u64);
            let spec = GrowSpec {
                x,
                y: &y_idx,
                n_classes: classes.len(),
                min_samples_split: params.min_samples_split,
                k_features,
                strategy: SplitStrategy::UniformRandom,
            };
            grow(&spec, (0..n).collect(), &mut rng).1
        })
        .collect();

    let mut totals = vec![0.0f64; d];
    for imp in &per_tree {
        for (t, v) in totals.iter_mut().zip(imp) {
            *t += v;
        }
    }
    let n_trees = params.n_estimators.max(1) as f64;
    totals.iter_mut().for_each(|t| *t /= n_trees);
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|t| *t /= sum);
    }
    Ok(ImportanceVector(totals))
}

/// Columns with importance strictly above the mean importance.
///
/// Degenerate vectors (all equal, or all zero because nothing ever split)
/// select every column, so selection never empties the feature set.
pub fn select_features(importance: &ImportanceVector) -> Vec<usize> {
    let d = importance.len();
    if d == 0 {
        return Vec::new();
    }
    let mean = importance.sum() / d as f64;
    let selected: Vec<usize> = importance
        .0
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > mean)
        .map(|(i, _)| i)
        .collect();
    if selected.is_empty() {
        (0..d).collect()
    } else {
        selected
    }
}
