use crate::discovery::EmbeddingMatrix;
use crate::error::{ensure, Result};

use super::pairwise_distances;

/// Added to the mean reachability distance so duplicated points get a large
/// but finite density; identical points then score exactly 1.
const DENSITY_EPS: f64 = 1e-10;

/// `max(5, floor(m / 10))`, capped at `m - 1`.
pub fn default_lof_neighbors(m: usize) -> usize {
    (m / 10).max(5).min(m.saturating_sub(1))
}

/// Local outlier factor of every row with Euclidean distances.
///
/// The neighbourhood of a point holds every other point within its
/// k-distance, so ties at the k-th distance enlarge it.
pub fn lof_scores(e: &EmbeddingMatrix, k_neighbors: usize) -> Result<Vec<f64>> {
    let m = e.len();
    ensure!(
        k_neighbors >= 2 && k_neighbors < m,
        Config,
        "k_neighbors must satisfy 2 <= k < m = {m}, got {k_neighbors}"
    );
    let dist = pairwise_distances(e);
    let d = |i: usize, j: usize| dist[i * m + j];

    let mut k_distance = vec![0.0; m];
    let mut neighborhoods: Vec<Vec<usize>> = Vec::with_capacity(m);
    for p in 0..m {
        let mut others: Vec<usize> = (0..m).filter(|&o| o != p).collect();
        others.sort_by(|&a, &b| d(p, a).total_cmp(&d(p, b)).then(a.cmp(&b)));
        let kd = d(p, others[k_neighbors - 1]);
        k_distance[p] = kd;
        neighborhoods.push(others.into_iter().take_while(|&o| d(p, o) <= kd).collect());
    }

    let lrd: Vec<f64> = (0..m)
        .map(|p| {
            let hood = &neighborhoods[p];
            let reach: f64 = hood.iter().map(|&o| k_distance[o].max(d(p, o))).sum();
            1.0 / (reach / hood.len() as f64 + DENSITY_EPS)
        })
        .collect();

    Ok((0..m)
        .map(|p| {
            let hood = &neighborhoods[p];
            hood.iter().map(|&o| lrd[o] / lrd[p]).sum::<f64>() / hood.len() as f64
        })
        .collect())
}
