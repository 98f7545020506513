//! Bagged random-forest classifier over the CART grower.

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeding::{derive_seed, seeded_rng};
use crate::telemetry::SubjectId;

use super::tree::{argmax_first, grow, GrowSpec, SplitStrategy, Tree};
use super::{class_index, LearnError, LearnParams};

/// A fitted forest. Prediction is a per-row majority vote over the trees'
/// leaf votes, ties broken toward the smallest subject id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    /// Sorted distinct training labels; tree votes index into this.
    pub classes: Vec<SubjectId>,
    pub n_features: usize,
    pub master_seed: u64,
}

impl ForestModel {
    /// JSON dump of the fitted trees, for inspection only.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Fits `params.n_trees` trees, each on a bootstrap resample (when
/// `params.bootstrap`), with split search over `params.max_features`
/// random columns per node.
///
/// Tree seeds derive from `(seed, tree_index)`, so the model is
/// bit-identical at any parallelism level.
pub fn fit_forest(
    x: ArrayView2<'_, f64>,
    y: &[SubjectId],
    params: &LearnParams,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    let (y_idx, classes) = class_index(x, y)?;
    let n = x.nrows();
    let k_features = params.max_features.count(x.ncols());

    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|tree_index| {
            let mut rng = seeded_rng(seed, tree_index as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let spec = GrowSpec {
                x,
                y: &y_idx,
                n_classes: classes.len(),
                min_samples_split: params.min_samples_split,
                k_features,
                strategy: SplitStrategy::Cart,
            };
            grow(&spec, rows, &mut rng).0
        })
        .collect();

    Ok(ForestModel { trees, classes, n_features: x.ncols(), master_seed: seed })
}

/// Majority-vote predictions for every row of `x`.
pub fn predict(model: &ForestModel, x: ArrayView2<'_, f64>) -> Result<Vec<SubjectId>, LearnError> {
    if x.ncols() != model.n_features {
        return Err(LearnError::DimensionMismatch {
            expected: model.n_features,
            found: x.ncols(),
        });
    }
    let mut out = Vec::with_capacity(x.nrows());
    for row in x.rows() {
        let row = row.as_slice().expect("row-major matrix");
        let mut votes = vec![0u32; model.classes.len()];
        for tree in &model.trees {
            votes[tree.vote(row)] += 1;
        }
        out.push(model.classes[argmax_first(&votes)]);
    }
    Ok(out)
}

/// Fraction of rows whose prediction matches `y`.
pub fn accuracy(predictions: &[SubjectId], y: &[SubjectId]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(y).filter(|(p, t)| p == t).count();
    hits as f64 / y.len() as f64
}

/// Stable per-window seed stream for harness use.
pub fn window_seed(master: u64, window_index: usize) -> u64 {
    derive_seed(master, window_index as u64)
}
