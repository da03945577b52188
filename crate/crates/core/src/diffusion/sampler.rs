use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

use super::{Denoiser, LatentGrid, Schedule};

/// Every latent of one sampling run, `z_t` first and `z_0` last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    latents: Vec<LatentGrid>,
    pub seed: u64,
    pub condition_tag: String,
}

impl Trajectory {
    pub fn new(latents: Vec<LatentGrid>, seed: u64, condition_tag: impl Into<String>) -> Result<Self> {
        ensure!(!latents.is_empty(), Dimension, "a trajectory holds at least one latent");
        let side = latents[0].side();
        ensure!(latents.iter().all(|l| l.side() == side), Dimension, "trajectory latents must share one side length");
        Ok(Self { latents, seed, condition_tag: condition_tag.into() })
    }

    /// Number of denoising steps `t`; the trajectory holds `t + 1` latents.
    pub fn steps(&self) -> usize {
        self.latents.len() - 1
    }

    pub fn side(&self) -> usize {
        self.latents[0].side()
    }

    /// The latent at sampling level `i`, i.e. `z_i`.
    pub fn at_level(&self, i: usize) -> &LatentGrid {
        &self.latents[self.steps() - i]
    }

    pub fn final_latent(&self) -> &LatentGrid {
        self.latents.last().expect("nonempty")
    }

    pub fn latents(&self) -> &[LatentGrid] {
        &self.latents
    }
}

/// Deterministic (η = 0) DDIM update from training timestep `from` to `to`.
pub fn ddim_step(
    z: &LatentGrid,
    eps_hat: &LatentGrid,
    from: usize,
    to: usize,
    schedule: &Schedule,
) -> Result<LatentGrid> {
    ensure!(from > to, Config, "DDIM steps run backwards in time, got {from} -> {to}");
    ensure!(from <= schedule.train_steps, Config, "timestep {from} beyond {} training steps", schedule.train_steps);
    z.check_same_shape(eps_hat)?;
    let (ab_from, ab_to) = (schedule.alpha_bar(from), schedule.alpha_bar(to));
    let (sa_from, sn_from) = (ab_from.sqrt(), (1.0 - ab_from).sqrt());
    let (sa_to, sn_to) = (ab_to.sqrt(), (1.0 - ab_to).sqrt());
    let values = z
        .values()
        .iter()
        .zip(eps_hat.values())
        .map(|(zv, e)| {
            let x0 = (zv - sn_from * e) / sa_from;
            sa_to * x0 + sn_to * e
        })
        .collect();
    Ok(LatentGrid::from_values_unchecked(z.side(), values))
}

/// Seeded standard-normal grid.
pub(crate) fn gaussian_grid(side: usize, seed: u64) -> LatentGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..side * side).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    LatentGrid::from_values_unchecked(side, values)
}

/// Runs the full DDIM chain from seeded noise and keeps every latent.
pub fn sample_with_cache(
    denoiser: &dyn Denoiser,
    condition: &str,
    identity: Option<&[f64]>,
    seed: u64,
    side: usize,
    schedule: &Schedule,
) -> Result<Trajectory> {
    ensure!(side >= 1, Dimension, "latent side must be at least 1");
    let t = schedule.steps();
    let mut latents = Vec::with_capacity(t + 1);
    latents.push(gaussian_grid(side, seed));
    for level in (1..=t).rev() {
        let z = latents.last().expect("nonempty");
        let from = schedule.timestep(level);
        let eps = denoiser.predict_noise(condition, identity, z, from)?;
        let next = ddim_step(z, &eps, from, schedule.timestep(level - 1), schedule)?;
        latents.push(next);
    }
    Trajectory::new(latents, seed, condition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::OracleDenoiser;

    fn grid(values: &[f64]) -> LatentGrid {
        let side = (values.len() as f64).sqrt() as usize;
        LatentGrid::new(side, values.to_vec()).unwrap()
    }

    #[test]
    fn zero_noise_step_scales() {
        let s = Schedule::default();
        let z = grid(&[1.0, -2.0, 0.5, 3.0]);
        let out = ddim_step(&z, &LatentGrid::zeros(2), 700, 300, &s).unwrap();
        let c = (s.alpha_bar(300) / s.alpha_bar(700)).sqrt();
        for (o, v) in out.values().iter().zip(z.values()) {
            assert!((o - c * v).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_step_returns_clean_estimate() {
        let s = Schedule::default();
        let z = grid(&[1.0, -2.0, 0.5, 3.0]);
        let eps = grid(&[0.3, 0.1, -0.2, 0.0]);
        let out = ddim_step(&z, &eps, 40, 0, &s).unwrap();
        let ab = s.alpha_bar(40);
        for ((o, zv), e) in out.values().iter().zip(z.values()).zip(eps.values()) {
            assert_eq!(*o, (zv - (1.0 - ab).sqrt() * e) / ab.sqrt());
        }
    }

    #[test]
    fn step_preconditions() {
        let s = Schedule::default();
        let z = LatentGrid::zeros(2);
        assert!(ddim_step(&z, &z, 100, 100, &s).is_err());
        assert!(ddim_step(&z, &LatentGrid::zeros(3), 100, 20, &s).is_err());
    }

    #[test]
    fn two_oracle_steps_equal_one() {
        let s = Schedule::default();
        let target = grid(&[0.9, -0.4, 0.2, -1.0]);
        let oracle = OracleDenoiser::new(target, &s);
        let z = gaussian_grid(2, 4);
        let e1 = oracle.predict_noise("", None, &z, 900).unwrap();
        let mid = ddim_step(&z, &e1, 900, 500, &s).unwrap();
        let e2 = oracle.predict_noise("", None, &mid, 500).unwrap();
        let two = ddim_step(&mid, &e2, 500, 120, &s).unwrap();
        let one = ddim_step(&z, &e1, 900, 120, &s).unwrap();
        assert!(two.max_abs_diff(&one).unwrap() <= 1e-9);
    }

    #[test]
    fn trajectory_length_and_order() {
        let s = Schedule::default();
        let target = LatentGrid::from_fn(4, |x, y| (x as f64 - y as f64) / 4.0);
        let oracle = OracleDenoiser::new(target.clone(), &s);
        let traj = sample_with_cache(&oracle, "tag", None, 9, 4, &s).unwrap();
        assert_eq!(traj.latents().len(), 51);
        assert_eq!(traj.at_level(50), &gaussian_grid(4, 9));
        assert_eq!(traj.at_level(0), traj.final_latent());
        assert!(traj.final_latent().max_abs_diff(&target).unwrap() <= 1e-6);
        assert_eq!(traj.condition_tag, "tag");
    }
}
