//! Density-based clustering over (lat, lon) pairs.
//!
//! Classic scan-order DBSCAN: a point with at least `min_pts` neighbors
//! within `eps` (itself included) is a core point; clusters grow by
//! expanding core neighborhoods in input order, and border points stay with
//! the first cluster whose expansion reaches them. Distances are plain
//! Euclidean on the raw coordinates.
//!
//! Neighborhood queries go through a uniform grid of `eps`-sized cells so
//! fitting a whole dataset of fixes stays near-linear; the grid changes
//! nothing about which labels come out.

use std::collections::{HashMap, VecDeque};

/// Cluster assignment for one point. Derived ordering puts clusters in id
/// order and noise last, which the gps token grammar relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClusterLabel {
    Cluster(u32),
    Noise,
}

impl ClusterLabel {
    /// Symbol used inside gps tokens.
    pub fn symbol(&self) -> String {
        match self {
            ClusterLabel::Cluster(id) => id.to_string(),
            ClusterLabel::Noise => "n".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Unvisited,
    Noise,
    Assigned(u32),
}

struct CellGrid {
    cells: HashMap<(i64, i64), Vec<usize>>,
    inv_eps: f64,
}

impl CellGrid {
    fn build(points: &[(f64, f64)], eps: f64) -> Self {
        let inv_eps = 1.0 / eps;
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            cells
                .entry(((x * inv_eps).floor() as i64, (y * inv_eps).floor() as i64))
                .or_default()
                .push(i);
        }
        Self { cells, inv_eps }
    }

    fn neighbors(&self, points: &[(f64, f64)], i: usize, eps_sq: f64, out: &mut Vec<usize>) {
        out.clear();
        let (x, y) = points[i];
        let cx = (x * self.inv_eps).floor() as i64;
        let cy = (y * self.inv_eps).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(members) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &j in members {
                        let (px, py) = points[j];
                        let d2 = (px - x) * (px - x) + (py - y) * (py - y);
                        if d2 <= eps_sq {
                            out.push(j);
                        }
                    }
                }
            }
        }
    }
}

/// Clusters `points` and returns one label per point, in input order.
///
/// Label assignment is deterministic for a given input order: clusters are
/// numbered by discovery, and a border point reachable from several
/// clusters keeps the label of the cluster expanded first.
pub fn dbscan(points: &[(f64, f64)], eps: f64, min_pts: usize) -> Vec<ClusterLabel> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");

    let n = points.len();
    let mut states = vec![State::Unvisited; n];
    if n == 0 {
        return Vec::new();
    }

    let grid = CellGrid::build(points, eps);
    let eps_sq = eps * eps;
    let mut next_cluster = 0u32;
    let mut neighborhood = Vec::new();
    let mut queue = VecDeque::new();

    for i in 0..n {
        if states[i] != State::Unvisited {
            continue;
        }
        grid.neighbors(points, i, eps_sq, &mut neighborhood);
        if neighborhood.len() < min_pts {
            states[i] = State::Noise;
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        states[i] = State::Assigned(cluster);
        queue.clear();
        queue.extend(neighborhood.iter().copied().filter(|&j| j != i));
        while let Some(j) = queue.pop_front() {
            match states[j] {
                State::Assigned(_) => continue,
                State::Noise => {
                    // previously rejected point becomes a border point
                    states[j] = State::Assigned(cluster);
                    continue;
                }
                State::Unvisited => {
                    states[j] = State::Assigned(cluster);
                    grid.neighbors(points, j, eps_sq, &mut neighborhood);
                    if neighborhood.len() >= min_pts {
                        queue.extend(neighborhood.iter().copied());
                    }
                }
            }
        }
    }

    states
        .into_iter()
        .map(|s| match s {
            State::Assigned(id) => ClusterLabel::Cluster(id),
            State::Noise => ClusterLabel::Noise,
            State::Unvisited => unreachable!("every point is visited"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_form_one_cluster() {
        let points = vec![(1.0, 2.0); 10];
        let labels = dbscan(&points, 0.5, 5);
        assert!(labels.iter().all(|&l| l == ClusterLabel::Cluster(0)));
    }

    #[test]
    fn isolated_points_are_noise() {
        let points = vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        let labels = dbscan(&points, 0.5, 2);
        assert!(labels.iter().all(|&l| l == ClusterLabel::Noise));
    }

    #[test]
    fn two_separated_blobs_get_two_clusters() {
        let mut points = Vec::new();
        for i in 0..6 {
            points.push((0.0 + 0.01 * i as f64, 0.0));
        }
        for i in 0..6 {
            points.push((100.0 + 0.01 * i as f64, 0.0));
        }
        let labels = dbscan(&points, 0.5, 5);
        assert!(labels[..6].iter().all(|&l| l == ClusterLabel::Cluster(0)));
        assert!(labels[6..].iter().all(|&l| l == ClusterLabel::Cluster(1)));
    }

    #[test]
    fn min_pts_one_makes_everything_core() {
        let points = vec![(0.0, 0.0), (10.0, 10.0)];
        let labels = dbscan(&points, 0.5, 1);
        assert_eq!(labels, vec![ClusterLabel::Cluster(0), ClusterLabel::Cluster(1)]);
    }

    #[test]
    fn noise_ordering_sorts_after_clusters() {
        assert!(ClusterLabel::Cluster(3) < ClusterLabel::Noise);
        assert!(ClusterLabel::Cluster(0) < ClusterLabel::Cluster(1));
    }

    #[test]
    fn empty_input_yields_no_labels() {
        assert!(dbscan(&[], 0.5, 5).is_empty());
    }
}
