use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// A square single-channel grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGrid {
    side: usize,
    values: Vec<f64>,
}

impl LatentGrid {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(side >= 1, Dimension, "grid side must be at least 1");
        ensure!(
            values.len() == side * side,
            Dimension,
            "expected {} values for side {side}, got {}",
            side * side,
            values.len()
        );
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite grid value {v}")));
        }
        Ok(Self { side, values })
    }

    pub fn zeros(side: usize) -> Self {
        Self { side, values: vec![0.0; side * side] }
    }

    pub(crate) fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(side * side);
        for y in 0..side {
            for x in 0..side {
                values.push(f(x, y));
            }
        }
        Self { side, values }
    }

    pub(crate) fn from_values_unchecked(side: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), side * side);
        Self { side, values }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at column `x`, row `y`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.side + x]
    }

    pub fn check_same_shape(&self, other: &LatentGrid) -> Result<()> {
        ensure!(self.side == other.side, Dimension, "grid sides differ: {} vs {}", self.side, other.side);
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &LatentGrid) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    pub fn l2_distance(&self, other: &LatentGrid) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    pub fn scale(&self, c: f64) -> LatentGrid {
        Self { side: self.side, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Bilinear upsampling by an integer factor, sampling at pixel centres.
    pub fn upsample(&self, factor: usize) -> LatentGrid {
        let factor = factor.max(1);
        let n = self.side;
        let out_side = n * factor;
        let clamp = |v: f64| v.clamp(0.0, (n - 1) as f64);
        LatentGrid::from_fn(out_side, |x, y| {
            let sx = clamp((x as f64 + 0.5) / factor as f64 - 0.5);
            let sy = clamp((y as f64 + 0.5) / factor as f64 - 0.5);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(n - 1), (y0 + 1).min(n - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
            let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }
}
