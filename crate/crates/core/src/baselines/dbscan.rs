use std::collections::VecDeque;

use crate::discovery::EmbeddingMatrix;
use crate::error::{ensure, Result};

use super::{pairwise_distances, OutlierLabels, PointLabel};

pub const DBSCAN_DEFAULT_MIN_PTS: usize = 4;

/// Half the median pairwise distance.
pub fn default_eps(e: &EmbeddingMatrix) -> f64 {
    let m = e.len();
    let dist = pairwise_distances(e);
    let mut upper: Vec<f64> =
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| dist[i * m + j]).collect();
    if upper.is_empty() {
        return f64::MIN_POSITIVE;
    }
    upper.sort_by(f64::total_cmp);
    let n = upper.len();
    let median = if n % 2 == 1 { upper[n / 2] } else { 0.5 * (upper[n / 2 - 1] + upper[n / 2]) };
    // eps must stay positive even when every point coincides
    (0.5 * median).max(f64::MIN_POSITIVE)
}

/// DBSCAN with Euclidean distances.
///
/// A point is core when at least `min_pts` points (itself included) lie within
/// `eps`. Clusters are numbered in the order their first core point appears,
/// and a border point belongs to the first cluster that reaches it.
pub fn dbscan(e: &EmbeddingMatrix, eps: f64, min_pts: usize) -> Result<OutlierLabels> {
    ensure!(eps > 0.0, Config, "eps must be positive, got {eps}");
    ensure!(min_pts >= 1, Config, "min_pts must be at least 1");
    let m = e.len();
    let dist = pairwise_distances(e);
    let neighbors: Vec<Vec<usize>> = (0..m).map(|p| (0..m).filter(|&o| dist[p * m + o] <= eps).collect()).collect();
    let is_core: Vec<bool> = neighbors.iter().map(|n| n.len() >= min_pts).collect();

    let mut labels = vec![PointLabel::Noise; m];
    let mut assigned = vec![false; m];
    let mut next_cluster = 0;
    let mut queue = VecDeque::new();
    for start in 0..m {
        if assigned[start] || !is_core[start] {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        assigned[start] = true;
        labels[start] = PointLabel::Cluster(cluster);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &o in &neighbors[p] {
                if assigned[o] {
                    continue;
                }
                assigned[o] = true;
                labels[o] = PointLabel::Cluster(cluster);
                if is_core[o] {
                    queue.push_back(o);
                }
            }
        }
    }
    Ok(OutlierLabels { labels, scores: None })
}
