//! Iterative identity discovery.
//!
//! Each round decomposes the current embedding matrix, projects every row onto
//! the span of the dominant right singular vectors, and drops the rows whose
//! projection residual is largest. The survivors of the final round are
//! averaged into one identity embedding.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::matrix::{mat_mul, mean_row, Matrix};
use crate::svd::{thin_svd, SvdFactors};

/// Rows are embeddings; `source_ids[i]` names the sample behind row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    inner: Matrix,
    source_ids: Vec<usize>,
}

impl EmbeddingMatrix {
    /// Wraps a matrix, numbering the rows `0..m`.
    pub fn new(inner: Matrix) -> Result<Self> {
        let ids = (0..inner.rows()).collect();
        Self::with_ids(inner, ids)
    }

    pub fn with_ids(inner: Matrix, source_ids: Vec<usize>) -> Result<Self> {
        ensure!(
            inner.rows() >= 1 && inner.cols() >= 1,
            Dimension,
            "embedding matrix must be at least 1x1, got {}x{}",
            inner.rows(),
            inner.cols()
        );
        ensure!(
            source_ids.len() == inner.rows(),
            Dimension,
            "{} source ids for {} rows",
            source_ids.len(),
            inner.rows()
        );
        let mut sorted = source_ids.clone();
        sorted.sort_unstable();
        ensure!(sorted.windows(2).all(|w| w[0] != w[1]), Config, "source ids must be unique");
        Ok(Self { inner, source_ids })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn source_ids(&self) -> &[usize] {
        &self.source_ids
    }

    /// Number of embeddings.
    pub fn len(&self) -> usize {
        self.inner.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inner.cols()
    }

    /// Keeps the rows at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> EmbeddingMatrix {
        EmbeddingMatrix {
            inner: self.inner.select_rows(positions),
            source_ids: positions.iter().map(|&p| self.source_ids[p]).collect(),
        }
    }

    /// Rescales every nonzero row to unit Euclidean norm.
    pub fn normalized(&self) -> EmbeddingMatrix {
        let (m, d) = self.inner.shape();
        let mut values = Vec::with_capacity(m * d);
        for r in self.inner.row_iter() {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            values.extend(r.iter().map(|x| x * s));
        }
        EmbeddingMatrix {
            inner: Matrix::from_vec(m, d, values).expect("finite by construction"),
            source_ids: self.source_ids.clone(),
        }
    }
}

/// How many right singular directions span the reconstruction subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankSelection {
    /// A fixed count, clamped each round to `min(m, d)` of the current matrix.
    Fixed(usize),
    /// The smallest count whose squared singular values reach this fraction of
    /// the total, clamped to `[1, min(m, d) - 1]`.
    Energy(f64),
}

impl RankSelection {
    pub fn resolve(&self, singular_values: &[f64]) -> usize {
        let q = singular_values.len();
        match *self {
            RankSelection::Fixed(k) => k.clamp(1, q.max(1)),
            RankSelection::Energy(fraction) => {
                let total: f64 = singular_values.iter().map(|s| s * s).sum();
                let mut acc = 0.0;
                let mut k = q;
                for (i, s) in singular_values.iter().enumerate() {
                    acc += s * s;
                    if acc >= fraction * total {
                        k = i + 1;
                        break;
                    }
                }
                k.clamp(1, q.saturating_sub(1).max(1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub rank: RankSelection,
    /// Fraction of the current rows kept each round, in `(0, 1]`.
    pub ratio: f64,
    pub iterations: usize,
    pub min_keep: usize,
    /// Unit-normalise rows before the first round.
    pub normalize_rows: bool,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self { rank: RankSelection::Fixed(1), ratio: 0.6, iterations: 3, min_keep: 1, normalize_rows: false }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.ratio > 0.0 && self.ratio <= 1.0, Config, "ratio must lie in (0, 1], got {}", self.ratio);
        ensure!(self.iterations >= 1, Config, "iteration count must be at least 1");
        ensure!(self.min_keep >= 1, Config, "min_keep must be at least 1");
        match self.rank {
            RankSelection::Fixed(k) => ensure!(k >= 1, Config, "rank must be at least 1"),
            RankSelection::Energy(f) => {
                ensure!(f > 0.0 && f <= 1.0, Config, "energy fraction must lie in (0, 1], got {f}")
            }
        }
        Ok(())
    }

    /// Rows surviving one round out of `current`: `max(floor(current * ratio), min_keep)`,
    /// never more than `current`.
    pub fn keep_count(&self, current: usize) -> usize {
        (((current as f64) * self.ratio) as usize).max(self.min_keep).min(current)
    }
}

/// One filtering round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub rank: usize,
    pub kept_ids: Vec<usize>,
    pub removed_ids: Vec<usize>,
    /// Reconstruction error of every row entering the round, in row order.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub initial_count: usize,
    pub iterations: Vec<IterationRecord>,
    pub final_embedding: Vec<f64>,
    pub retained_fraction: f64,
}

impl FilterReport {
    /// Source ids that survived every round.
    pub fn kept_ids(&self) -> &[usize] {
        &self.iterations.last().expect("at least one round").kept_ids
    }
}

/// `V_k V_kᵀ` from an existing decomposition.
pub fn projector_from_svd(svd: &SvdFactors, k: usize) -> Result<Matrix> {
    let q = svd.singular_values.len();
    ensure!(k >= 1 && k <= q, Config, "rank {k} outside 1..={q}");
    let vk = svd.v.leading_columns(k);
    mat_mul(&vk, &vk.transpose())
}

/// The `d × d` orthogonal projector onto the top-`k` right singular subspace.
pub fn reconstruction_matrix(e: &EmbeddingMatrix, k: usize) -> Result<Matrix> {
    let q = e.len().min(e.dim());
    ensure!(k >= 1 && k <= q, Config, "rank {k} outside 1..={q}");
    projector_from_svd(&thin_svd(e.matrix())?, k)
}

/// Per-row mean of squared residuals `E - E W`.
pub fn reconstruction_errors(e: &EmbeddingMatrix, w: &Matrix) -> Result<Vec<f64>> {
    let d = e.dim();
    ensure!(w.shape() == (d, d), Dimension, "reconstruction matrix is {}x{}, expected {d}x{d}", w.rows(), w.cols());
    let projected = mat_mul(e.matrix(), w)?;
    Ok(e.matrix()
        .row_iter()
        .zip(projected.row_iter())
        .map(|(r, p)| r.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d as f64)
        .collect())
}

/// Positions of the `keep` smallest scores, ties going to the earlier
/// position, returned in ascending position order.
pub(crate) fn smallest_positions(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    kept
}

struct Round {
    survivors: EmbeddingMatrix,
    record: IterationRecord,
}

fn run_round(e: &EmbeddingMatrix, cfg: &DiscoveryConfig) -> Result<Round> {
    let svd = thin_svd(e.matrix())?;
    let rank = cfg.rank.resolve(&svd.singular_values);
    let w = projector_from_svd(&svd, rank)?;
    let errors = reconstruction_errors(e, &w)?;
    let kept = smallest_positions(&errors, cfg.keep_count(e.len()));
    let survivors = e.select(&kept);
    let mut is_kept = vec![false; e.len()];
    kept.iter().for_each(|&p| is_kept[p] = true);
    let removed_ids = (0..e.len()).filter(|&p| !is_kept[p]).map(|p| e.source_ids[p]).collect();
    Ok(Round {
        record: IterationRecord { rank, kept_ids: survivors.source_ids.clone(), removed_ids, errors },
        survivors,
    })
}

/// One filtering round; returns the survivors (in input order) and the ids removed.
pub fn filter_once(e: &EmbeddingMatrix, cfg: &DiscoveryConfig) -> Result<(EmbeddingMatrix, Vec<usize>)> {
    cfg.validate()?;
    let round = run_round(e, cfg)?;
    Ok((round.survivors, round.record.removed_ids))
}

/// Runs `cfg.iterations` filtering rounds and averages the survivors.
pub fn discover_identity(e: &EmbeddingMatrix, cfg: &DiscoveryConfig) -> Result<FilterReport> {
    cfg.validate()?;
    let mut current = if cfg.normalize_rows { e.normalized() } else { e.clone() };
    let mut iterations = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let round = run_round(&current, cfg)?;
        iterations.push(round.record);
        current = round.survivors;
    }
    let final_embedding = mean_row(current.matrix())?;
    Ok(FilterReport {
        initial_count: e.len(),
        iterations,
        final_embedding,
        retained_fraction: current.len() as f64 / e.len() as f64,
    })
}

/// Plain mean of every embedding.
pub fn naive_average(e: &EmbeddingMatrix) -> Vec<f64> {
    mean_row(e.matrix()).expect("an EmbeddingMatrix has at least one row")
}
