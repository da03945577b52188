use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const DEFAULT_TRAIN_STEPS: usize = 1000;
pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_BETA_MIN: f64 = 1e-4;
pub const DEFAULT_BETA_MAX: f64 = 0.02;

/// A linear-beta noise schedule subsampled to `t` sampling levels.
///
/// Level `0` is the clean timestep `0`; level `i >= 1` is
/// `sample_indices[i - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub train_steps: usize,
    /// `betas[j - 1]` is the beta of training timestep `j`.
    pub betas: Vec<f64>,
    /// Cumulative products, `alpha_bars[0] = 1`, length `train_steps + 1`.
    pub alpha_bars: Vec<f64>,
    /// Strictly increasing training timesteps of levels `1..=t`.
    pub sample_indices: Vec<usize>,
}

pub fn make_schedule(train_steps: usize, t: usize, beta_min: f64, beta_max: f64) -> Result<Schedule> {
    ensure!(t >= 1, Config, "at least one sampling step is required");
    ensure!(t <= train_steps, Config, "{t} sampling steps exceed {train_steps} training steps");
    ensure!(
        0.0 < beta_min && beta_min < beta_max && beta_max < 1.0,
        Config,
        "betas must satisfy 0 < beta_min < beta_max < 1, got {beta_min}..{beta_max}"
    );
    let span = (train_steps - 1).max(1) as f64;
    let betas: Vec<f64> = (0..train_steps).map(|j| beta_min + (beta_max - beta_min) * j as f64 / span).collect();
    let mut alpha_bars = Vec::with_capacity(train_steps + 1);
    alpha_bars.push(1.0);
    let mut acc = 1.0;
    for b in &betas {
        acc *= 1.0 - b;
        alpha_bars.push(acc);
    }
    // round(j * T / t), in integers
    let sample_indices = (1..=t).map(|j| (2 * j * train_steps + t) / (2 * t)).collect();
    Ok(Schedule { train_steps, betas, alpha_bars, sample_indices })
}

impl Default for Schedule {
    fn default() -> Self {
        make_schedule(DEFAULT_TRAIN_STEPS, DEFAULT_STEPS, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX)
            .expect("default schedule is valid")
    }
}

impl Schedule {
    /// Number of sampling levels `t`.
    pub fn steps(&self) -> usize {
        self.sample_indices.len()
    }

    /// Training timestep of sampling level `level` (`0..=t`).
    pub fn timestep(&self, level: usize) -> usize {
        if level == 0 {
            0
        } else {
            self.sample_indices[level - 1]
        }
    }

    pub fn alpha_bar(&self, timestep: usize) -> f64 {
        self.alpha_bars[timestep]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_product_and_first_factor() {
        let s = Schedule::default();
        assert_eq!(s.alpha_bars[0], 1.0);
        assert!((s.alpha_bars[1] - 0.9999).abs() < 1e-15);
        assert_eq!(s.alpha_bars.len(), 1001);
    }

    #[test]
    fn strictly_decreasing_and_evenly_spaced() {
        let s = make_schedule(1000, 50, 1e-4, 0.02).unwrap();
        assert!(s.alpha_bars.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(s.sample_indices.len(), 50);
        assert_eq!(s.sample_indices[0], 20);
        assert_eq!(*s.sample_indices.last().unwrap(), 1000);
        assert!(s.sample_indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.timestep(0), 0);
        assert_eq!(s.timestep(40), 800);
    }

    #[test]
    fn uneven_subsampling_stays_strict() {
        let s = make_schedule(7, 7, 0.01, 0.2).unwrap();
        assert_eq!(s.sample_indices, (1..=7).collect::<Vec<_>>());
        let s = make_schedule(10, 3, 0.01, 0.2).unwrap();
        assert_eq!(s.sample_indices, vec![3, 7, 10]);
    }

    #[test]
    fn unit_variance_split() {
        let s = Schedule::default();
        for &ab in &s.alpha_bars {
            let total = ab.sqrt().powi(2) + (1.0 - ab).sqrt().powi(2);
            assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_invalid() {
        assert!(make_schedule(10, 11, 1e-4, 0.02).is_err());
        assert!(make_schedule(10, 0, 1e-4, 0.02).is_err());
        assert!(make_schedule(10, 5, 0.02, 1e-4).is_err());
        assert!(make_schedule(10, 5, 0.0, 0.02).is_err());
        assert!(make_schedule(10, 5, 1e-4, 1.0).is_err());
    }
}
