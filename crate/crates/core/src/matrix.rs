//! Dense row-major matrices of `f64`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A dense, row-major matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major values, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(
            values.len() == rows * cols,
            Dimension,
            "expected {} values for a {rows}x{cols} matrix, got {}",
            rows * cols,
            values.len()
        );
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(crate::Error::Numerical(format!(
                "non-finite entry {} at row {}, col {}",
                values[pos],
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            ensure!(r.len() == cols, Dimension, "row {i} has {} entries, expected {cols}", r.len());
            values.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)` at every position.
    ///
    /// Used internally where entries are known to be finite by construction.
    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let step = self.cols.max(1);
        self.values.chunks_exact(step).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Returns a new matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, values }
    }

    /// Returns the leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        ensure!(
            self.shape() == other.shape(),
            Dimension,
            "cannot subtract {:?} from {:?}",
            other.shape(),
            self.shape()
        );
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, values })
    }

    /// Largest absolute entry; zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// Standard matrix product `a · b`.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure!(a.cols == b.rows, Dimension, "cannot multiply {}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols);
    let mut out = vec![0.0; a.rows * b.cols];
    // i-k-j order keeps the inner loop on contiguous rows of `b` and `out`.
    for i in 0..a.rows {
        let out_row = &mut out[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.values[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.values[k * b.cols..(k + 1) * b.cols];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
    Ok(Matrix { rows: a.rows, cols: b.cols, values: out })
}

/// Column-wise arithmetic mean of the rows.
pub fn mean_row(a: &Matrix) -> Result<Vec<f64>> {
    ensure!(a.rows >= 1, Dimension, "mean of a matrix with zero rows");
    let mut mean = vec![0.0; a.cols];
    for r in a.row_iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    let n = a.rows as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
