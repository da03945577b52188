//! Classical outlier-exclusion baselines and the compactness metric used to
//! compare them against identity discovery.

mod dbscan;
mod lof;
mod mahalanobis;

pub use dbscan::{dbscan, default_eps, DBSCAN_DEFAULT_MIN_PTS};
pub use lof::{default_lof_neighbors, lof_scores};
pub use mahalanobis::{mahalanobis_compactness, MahalanobisMetric, DEFAULT_SHRINKAGE};

use serde::{Deserialize, Serialize};

use crate::discovery::{smallest_positions, EmbeddingMatrix};
use crate::error::{ensure, Result};
use crate::matrix::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointLabel {
    Cluster(usize),
    Noise,
}

impl PointLabel {
    pub fn is_noise(self) -> bool {
        matches!(self, PointLabel::Noise)
    }
}

/// Per-row labels from an outlier detector, optionally with raw scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierLabels {
    pub labels: Vec<PointLabel>,
    pub scores: Option<Vec<f64>>,
}

impl OutlierLabels {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_noise()).count()
    }

    pub fn cluster_count(&self) -> usize {
        self.labels
            .iter()
            .filter_map(|l| match l {
                PointLabel::Cluster(c) => Some(c + 1),
                PointLabel::Noise => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Keeps the `keep` rows with the smallest scores, ties to the earlier row,
/// preserving input order.
pub fn filter_by_scores(e: &EmbeddingMatrix, scores: &[f64], keep: usize) -> Result<EmbeddingMatrix> {
    ensure!(scores.len() == e.len(), Dimension, "{} scores for {} embeddings", scores.len(), e.len());
    ensure!(keep >= 1 && keep <= e.len(), Config, "keep {keep} outside 1..={}", e.len());
    Ok(e.select(&smallest_positions(scores, keep)))
}

/// Keeps every row not labelled noise; `None` when every row is noise.
pub fn filter_by_labels(e: &EmbeddingMatrix, labels: &OutlierLabels) -> Option<EmbeddingMatrix> {
    let kept: Vec<usize> = (0..e.len()).filter(|&i| !labels.labels[i].is_noise()).collect();
    (!kept.is_empty()).then(|| e.select(&kept))
}

/// Full `m × m` Euclidean distance table, row-major.
pub(crate) fn pairwise_distances(e: &EmbeddingMatrix) -> Vec<f64> {
    let m = e.len();
    let mat = e.matrix();
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = squared_distance(mat.row(i), mat.row(j)).sqrt();
            out[i * m + j] = d;
            out[j * m + i] = d;
        }
    }
    out
}
