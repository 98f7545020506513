//! CART tree growing shared by the random forest and the extra-trees
//! importance estimator.
//!
//! Splits are numeric (`x <= threshold` goes left). Nodes grow until pure,
//! until fewer than `min_samples_split` rows remain, or until no candidate
//! column admits a valid split (both sides non-empty). Zero-gain splits are
//! allowed — each one still strictly shrinks both children, so growth
//! terminates and consistent data is always driven to purity.

use ndarray::ArrayView2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One tree node; children are indices into the tree's node arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { col: usize, threshold: f64, left: usize, right: usize },
    Leaf { counts: Vec<u32> },
}

/// A fitted decision tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Class-index vote for one row: the leaf's majority class, ties going
    /// to the smallest class index.
    pub fn vote(&self, row: &[f64]) -> usize {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Split { col, threshold, left, right } => {
                    node = if row[*col] <= *threshold { *left } else { *right };
                }
                Node::Leaf { counts } => return argmax_first(counts),
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Index of the first maximum, i.e. ties break toward the smallest class.
pub fn argmax_first(counts: &[u32]) -> usize {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Gini impurity of a class histogram: `1 - sum(p_c^2)`.
pub fn gini(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = f64::from(total);
    1.0 - counts.iter().map(|&c| (f64::from(c) / t) * (f64::from(c) / t)).sum::<f64>()
}

/// How candidate thresholds are chosen at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Exhaustive best-gain search over midpoints of consecutive distinct
    /// values (random forest).
    Cart,
    /// One uniform-random threshold within the column's node range, best
    /// gain among candidates (extra trees).
    UniformRandom,
}

pub struct GrowSpec<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub min_samples_split: usize,
    /// Candidate columns drawn per node.
    pub k_features: usize,
    pub strategy: SplitStrategy,
}

struct CandidateSplit {
    col: usize,
    threshold: f64,
    gain: f64,
}

fn class_counts(spec: &GrowSpec, rows: &[usize]) -> Vec<u32> {
    let mut counts = vec![0u32; spec.n_classes];
    for &r in rows {
        counts[spec.y[r]] += 1;
    }
    counts
}

/// Best CART split over one column, or None when the column is constant
/// within the node.
fn best_cart_split_on(spec: &GrowSpec, rows: &[usize], col: usize, node_gini: f64) -> Option<CandidateSplit> {
    let mut pairs: Vec<(f64, usize)> = rows.iter().map(|&r| (spec.x[(r, col)], spec.y[r])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs.first().map(|p| p.0) == pairs.last().map(|p| p.0) {
        return None;
    }

    let n = pairs.len() as f64;
    let mut left = vec![0u32; spec.n_classes];
    let mut right = class_counts(spec, rows);
    let mut best: Option<CandidateSplit> = None;

    for i in 0..pairs.len() - 1 {
        let (value, class) = pairs[i];
        left[class] += 1;
        right[class] -= 1;
        let next_value = pairs[i + 1].0;
        if next_value == value {
            continue;
        }
        let mut threshold = 0.5 * (value + next_value);
        // rounding can collapse the midpoint onto the upper value, which
        // would leak the right block into the left side
        if threshold >= next_value {
            threshold = value;
        }
        let n_left = (i + 1) as f64;
        let n_right = n - n_left;
        let gain = node_gini - (n_left / n) * gini(&left) - (n_right / n) * gini(&right);
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(CandidateSplit { col, threshold, gain });
        }
    }
    best
}

/// Extra-trees split on one column: a single uniform threshold inside the
/// column's (min, max) node range.
fn random_split_on(
    spec: &GrowSpec,
    rows: &[usize],
    col: usize,
    node_gini: f64,
    rng: &mut ChaCha8Rng,
) -> Option<CandidateSplit> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &r in rows {
        let v = spec.x[(r, col)];
        min = min.min(v);
        max = max.max(v);
    }
    if !(min < max) {
        return None;
    }
    let threshold = rng.random_range(min..max);
    let mut left = vec![0u32; spec.n_classes];
    let mut right = vec![0u32; spec.n_classes];
    let mut n_left = 0.0f64;
    for &r in rows {
        if spec.x[(r, col)] <= threshold {
            left[spec.y[r]] += 1;
            n_left += 1.0;
        } else {
            right[spec.y[r]] += 1;
        }
    }
    let n = rows.len() as f64;
    let gain = node_gini - (n_left / n) * gini(&left) - ((n - n_left) / n) * gini(&right);
    Some(CandidateSplit { col, threshold, gain })
}

fn find_split(
    spec: &GrowSpec,
    rows: &[usize],
    node_gini: f64,
    rng: &mut ChaCha8Rng,
) -> Option<CandidateSplit> {
    let d = spec.x.ncols();
    let k = spec.k_features.clamp(1, d);
    let candidates = rand::seq::index::sample(rng, d, k);
    let mut best: Option<CandidateSplit> = None;
    for col in candidates {
        let candidate = match spec.strategy {
            SplitStrategy::Cart => best_cart_split_on(spec, rows, col, node_gini),
            SplitStrategy::UniformRandom => random_split_on(spec, rows, col, node_gini, rng),
        };
        if let Some(c) = candidate {
            if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    best
}

/// Grows one tree over `rows` (indices into `spec.x`).
///
/// Returns the tree and the per-column impurity decrease it attributes,
/// each split weighted by the fraction of the root's rows it sees.
pub fn grow(spec: &GrowSpec, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> (Tree, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut importances = vec![0.0; spec.x.ncols()];
    let n_root = rows.len() as f64;
    build(spec, rows, rng, &mut nodes, &mut importances, n_root);
    (Tree { nodes }, importances)
}

fn build(
    spec: &GrowSpec,
    rows: Vec<usize>,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
    importances: &mut [f64],
    n_root: f64,
) -> usize {
    let counts = class_counts(spec, &rows);
    let node_gini = gini(&counts);
    if rows.len() < spec.min_samples_split || node_gini == 0.0 {
        nodes.push(Node::Leaf { counts });
        return nodes.len() - 1;
    }
    let Some(split) = find_split(spec, &rows, node_gini, rng) else {
        nodes.push(Node::Leaf { counts });
        return nodes.len() - 1;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| spec.x[(r, split.col)] <= split.threshold);
    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

    importances[split.col] += (rows.len() as f64 / n_root) * split.gain;
    // reserve this node's slot so the root stays at index 0
    let id = nodes.len();
    nodes.push(Node::Leaf { counts: Vec::new() });
    let left = build(spec, left_rows, rng, nodes, importances, n_root);
    let right = build(spec, right_rows, rng, nodes, importances, n_root);
    nodes[id] = Node::Split { col: split.col, threshold: split.threshold, left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_of_pure_and_balanced_nodes() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert_eq!(gini(&[0, 0]), 0.0);
        assert!((gini(&[10, 10]) - 0.5).abs() < 1e-15);
        assert!((gini(&[1, 1, 1, 1]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn argmax_breaks_ties_toward_first() {
        assert_eq!(argmax_first(&[3, 3, 1]), 0);
        assert_eq!(argmax_first(&[1, 3, 3]), 1);
        assert_eq!(argmax_first(&[0]), 0);
    }
}
