//! Mahalanobis compactness under a shrinkage covariance estimate.
//!
//! The estimate is `(1 - s) · S + s · (tr S / d) · I` with `S` the unbiased
//! sample covariance. Embedding sets typically have far fewer rows than
//! dimensions, so `S` alone is singular; any positive `s` makes the estimate
//! invertible.
//!
//! When `d > n` the inverse is applied through the Woodbury identity on the
//! `n × n` Gram matrix instead of factoring the `d × d` estimate.

use crate::discovery::EmbeddingMatrix;
use crate::error::{ensure, Error, Result};
use crate::matrix::{dot, mat_mul, mean_row, Matrix};

pub const DEFAULT_SHRINKAGE: f64 = 0.1;

#[derive(Debug, Clone)]
enum Precision {
    /// The reference rows all coincide; only zero deviations have a distance.
    Degenerate,
    /// `Σ⁻¹ = (I - b Xᵀ K⁻¹ X) / a` with `K = a I + b X Xᵀ`.
    LowRank {
        centered: Matrix,
        a: f64,
        b: f64,
        k_chol: Matrix,
    },
    Dense {
        chol: Matrix,
    },
}

/// A fitted Mahalanobis metric.
#[derive(Debug, Clone)]
pub struct MahalanobisMetric {
    dim: usize,
    shrinkage: f64,
    precision: Precision,
}

impl MahalanobisMetric {
    /// Fits the shrinkage covariance of `reference`, picking whichever of the
    /// dense or low-rank routes is cheaper.
    pub fn fit(reference: &EmbeddingMatrix, shrinkage: f64) -> Result<Self> {
        let dense = shrinkage == 0.0 || reference.dim() <= reference.len();
        Self::fit_with(reference, shrinkage, dense)
    }

    /// Always factors the explicit `d × d` covariance estimate.
    pub fn fit_dense(reference: &EmbeddingMatrix, shrinkage: f64) -> Result<Self> {
        Self::fit_with(reference, shrinkage, true)
    }

    fn fit_with(reference: &EmbeddingMatrix, shrinkage: f64, dense: bool) -> Result<Self> {
        let n = reference.len();
        let d = reference.dim();
        ensure!(n >= 2, Dimension, "covariance needs at least 2 rows, got {n}");
        ensure!((0.0..=1.0).contains(&shrinkage), Config, "shrinkage must lie in [0, 1], got {shrinkage}");
        let mean = mean_row(reference.matrix())?;
        let centered = Matrix::from_fn(n, d, |i, j| reference.matrix().get(i, j) - mean[j]);
        let trace = centered.as_slice().iter().map(|x| x * x).sum::<f64>() / (n - 1) as f64;
        let precision = if trace == 0.0 {
            Precision::Degenerate
        } else {
            let a = shrinkage * trace / d as f64;
            let b = (1.0 - shrinkage) / (n - 1) as f64;
            if dense {
                let scatter = mat_mul(&centered.transpose(), &centered)?;
                let cov = Matrix::from_fn(d, d, |i, j| b * scatter.get(i, j) + if i == j { a } else { 0.0 });
                let chol = cholesky(&cov).ok_or_else(|| {
                    Error::Numerical("covariance estimate is singular; use a positive shrinkage".to_string())
                })?;
                Precision::Dense { chol }
            } else {
                let gram = mat_mul(&centered, &centered.transpose())?;
                let k = Matrix::from_fn(n, n, |i, j| b * gram.get(i, j) + if i == j { a } else { 0.0 });
                let k_chol = cholesky(&k)
                    .ok_or_else(|| Error::Numerical("Woodbury core matrix is not positive definite".into()))?;
                Precision::LowRank { centered, a, b, k_chol }
            }
        };
        Ok(Self { dim: d, shrinkage, precision })
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// `yᵀ Σ⁻¹ y` for a deviation vector `y`.
    pub fn squared_norm(&self, deviation: &[f64]) -> Result<f64> {
        ensure!(
            deviation.len() == self.dim,
            Dimension,
            "deviation has {} entries, metric has dimension {}",
            deviation.len(),
            self.dim
        );
        match &self.precision {
            Precision::Degenerate => {
                if deviation.iter().all(|&x| x == 0.0) {
                    Ok(0.0)
                } else {
                    Err(Error::Numerical("reference covariance is zero; distance undefined".into()))
                }
            }
            Precision::Dense { chol } => {
                let z = forward_substitute(chol, deviation);
                Ok(dot(&z, &z))
            }
            Precision::LowRank { centered, a, b, k_chol } => {
                let h: Vec<f64> = centered.row_iter().map(|r| dot(r, deviation)).collect();
                let z = forward_substitute(k_chol, &h);
                Ok(((dot(deviation, deviation) - b * dot(&z, &z)) / a).max(0.0))
            }
        }
    }

    /// Mean distance from each row of `group` to the group's own mean.
    pub fn compactness(&self, group: &EmbeddingMatrix) -> Result<f64> {
        let mean = mean_row(group.matrix())?;
        let mut total = 0.0;
        let mut deviation = vec![0.0; group.dim()];
        for r in group.matrix().row_iter() {
            deviation.iter_mut().zip(r.iter().zip(&mean)).for_each(|(y, (x, m))| *y = x - m);
            total += self.squared_norm(&deviation)?.sqrt();
        }
        Ok(total / group.len() as f64)
    }
}

/// Mean Mahalanobis distance of the rows to their mean, with the covariance
/// estimated from the same rows.
pub fn mahalanobis_compactness(e: &EmbeddingMatrix, shrinkage: f64) -> Result<f64> {
    MahalanobisMetric::fit(e, shrinkage)?.compactness(e)
}

/// Lower Cholesky factor, or `None` when a pivot is not clearly positive.
fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.as_slice()[j * n..j * n + j];
        let pivot = a.get(j, j) - dot(lj, lj);
        if !(pivot > 1e-12 * scale) {
            return None;
        }
        let ljj = pivot.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let s = {
                let li = &l.as_slice()[i * n..i * n + j];
                let lj = &l.as_slice()[j * n..j * n + j];
                dot(li, lj)
            };
            l.set(i, j, (a.get(i, j) - s) / ljj);
        }
    }
    Some(l)
}

/// Solves `L z = y` for lower-triangular `L`.
fn forward_substitute(l: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s = dot(&l.as_slice()[i * n..i * n + i], &z[..i]);
        z[i] = (y[i] - s) / l.get(i, i);
    }
    z
}
