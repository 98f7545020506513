//! From-scratch learners: CART trees, a bagged random forest, extremely
//! randomized trees for importance, and mean-threshold feature selection.
//!
//! Everything is seed-deterministic: per-tree RNG streams derive from
//! (seed, tree index), so fitting is reproducible at any thread count.

mod extra;
mod forest;
pub mod tree;

pub use extra::{extra_trees_importance, select_features, ImportanceVector};
pub use forest::{accuracy, fit_forest, predict, window_seed, ForestModel};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::SubjectId;

/// How many columns the split search may consider at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    /// `ceil(sqrt(d))` columns, the conventional classification default.
    Sqrt,
    All,
    Fixed(usize),
}

impl FeatureSubset {
    pub fn count(&self, d: usize) -> usize {
        match *self {
            FeatureSubset::Sqrt => (d as f64).sqrt().ceil() as usize,
            FeatureSubset::All => d,
            FeatureSubset::Fixed(k) => k,
        }
        .clamp(1, d.max(1))
    }
}

/// Learner hyperparameters. Only the two ensemble sizes are pinned by the
/// protocol; the rest are the conventional defaults and stay overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnParams {
    /// Random-forest size.
    pub n_trees: usize,
    /// Extra-trees size for feature selection.
    pub n_estimators: usize,
    pub max_features: FeatureSubset,
    pub min_samples_split: usize,
    /// Bootstrap resampling for the forest (extra trees always use the full
    /// sample).
    pub bootstrap: bool,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            n_trees: 250,
            n_estimators: 50,
            max_features: FeatureSubset::Sqrt,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LearnError {
    #[error("degenerate training window: {distinct} distinct label(s), need at least 2")]
    DegenerateLabels { distinct: usize },
    #[error("dimension mismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label count {labels} does not match row count {rows}")]
    LabelShape { rows: usize, labels: usize },
}

/// Maps labels to contiguous class indices over the sorted distinct labels.
pub(crate) fn class_index(
    x: ArrayView2<'_, f64>,
    y: &[SubjectId],
) -> Result<(Vec<usize>, Vec<SubjectId>), LearnError> {
    if x.nrows() != y.len() {
        return Err(LearnError::LabelShape { rows: x.nrows(), labels: y.len() });
    }
    let mut classes: Vec<SubjectId> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(LearnError::DegenerateLabels { distinct: classes.len() });
    }
    let y_idx = y
        .iter()
        .map(|s| classes.binary_search(s).expect("label present in class list"))
        .collect();
    Ok((y_idx, classes))
}
