use crate::error::Result;

use super::{LatentGrid, Schedule};

/// A noise predictor. Implementations must be deterministic: identical
/// arguments give identical output.
pub trait Denoiser: Send + Sync {
    fn predict_noise(
        &self,
        condition: &str,
        identity: Option<&[f64]>,
        latent: &LatentGrid,
        timestep: usize,
    ) -> Result<LatentGrid>;
}

/// Closed-form noise predictor toward a known clean target.
///
/// With `prior_std = 0` the prediction is exact:
/// `ε̂ = (z - √ᾱ · target) / √(1 - ᾱ)`, so a DDIM run lands on `target`. A
/// positive `prior_std` replaces the target by the posterior mean of a clean
/// image drawn from `N(target, prior_std²)` given `z`, which lets the current
/// latent pull the result away from the target at low noise levels.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    target: LatentGrid,
    alpha_bars: Vec<f64>,
    prior_std: f64,
}

impl OracleDenoiser {
    pub fn new(target: LatentGrid, schedule: &Schedule) -> Self {
        Self { target, alpha_bars: schedule.alpha_bars.clone(), prior_std: 0.0 }
    }

    pub fn with_prior_std(mut self, prior_std: f64) -> Self {
        self.prior_std = prior_std.max(0.0);
        self
    }

    pub fn target(&self) -> &LatentGrid {
        &self.target
    }

    pub fn prior_std(&self) -> f64 {
        self.prior_std
    }
}

impl Denoiser for OracleDenoiser {
    fn predict_noise(
        &self,
        _condition: &str,
        _identity: Option<&[f64]>,
        latent: &LatentGrid,
        timestep: usize,
    ) -> Result<LatentGrid> {
        latent.check_same_shape(&self.target)?;
        let ab = self.alpha_bars[timestep];
        let noise_var = 1.0 - ab;
        if noise_var <= 0.0 {
            return Ok(LatentGrid::zeros(latent.side()));
        }
        let (sa, sn) = (ab.sqrt(), noise_var.sqrt());
        let values = if self.prior_std == 0.0 {
            latent.values().iter().zip(self.target.values()).map(|(z, t)| (z - sa * t) / sn).collect()
        } else {
            let tau2 = self.prior_std * self.prior_std;
            let gain = sa * tau2 / (ab * tau2 + noise_var);
            latent
                .values()
                .iter()
                .zip(self.target.values())
                .map(|(z, t)| {
                    let x0 = t + gain * (z - sa * t);
                    (z - sa * x0) / sn
                })
                .collect()
        };
        Ok(LatentGrid::from_values_unchecked(latent.side(), values))
    }
}
