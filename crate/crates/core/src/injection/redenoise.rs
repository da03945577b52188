use serde::{Deserialize, Serialize};

use crate::diffusion::{ddim_step, Denoiser, LatentGrid, Schedule, Trajectory};
use crate::error::{ensure, Error, Result};

use super::{dilate, kernel_schedule, MaskSet};

pub const DEFAULT_T_PRIME: usize = 40;
pub const DEFAULT_K_MAX: usize = 50;

/// Which latent each character's denoise step reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DenoiseSource {
    /// The latent composed at the previous step, so identity refinement accumulates.
    #[default]
    Composed,
    /// The cached template latent at the same level.
    Cached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionConfig {
    /// Level at which re-denoising starts.
    pub start_t_prime: usize,
    /// Largest dilation kernel, in mask pixels.
    pub k_max: usize,
    pub denoise_source: DenoiseSource,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self { start_t_prime: DEFAULT_T_PRIME, k_max: DEFAULT_K_MAX, denoise_source: DenoiseSource::Composed }
    }
}

/// One character's identity-preserving denoiser and its conditioning.
pub struct CharacterGuide<'a> {
    pub condition: String,
    pub identity: Vec<f64>,
    pub denoiser: &'a dyn Denoiser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub level: usize,
    pub kernel: usize,
    /// Latent cells assigned to each character at this step.
    pub character_cells: Vec<usize>,
    pub background_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionTrace {
    pub latent: LatentGrid,
    pub steps: Vec<StepTrace>,
    /// Latent-resolution masks of the last composition, or the undilated
    /// masks when no step ran.
    pub final_masks: MaskSet,
}

/// Cell-wise selection: background cells from `cached_prev`, character `j`
/// cells from `per_char[j]`. The masks must partition the grid.
pub fn compose(cached_prev: &LatentGrid, per_char: &[LatentGrid], masks: &MaskSet) -> Result<LatentGrid> {
    ensure!(per_char.len() == masks.len(), Dimension, "{} character latents for {} masks", per_char.len(), masks.len());
    ensure!(
        masks.side() == cached_prev.side(),
        Dimension,
        "mask side {} does not match latent side {}",
        masks.side(),
        cached_prev.side()
    );
    for z in per_char {
        cached_prev.check_same_shape(z)?;
    }
    ensure!(masks.is_partition(), Layout, "masks do not partition the latent grid");
    let mut values = cached_prev.values().to_vec();
    for (z, m) in per_char.iter().zip(masks.characters()) {
        for ((v, &src), &bit) in values.iter_mut().zip(z.values()).zip(m.bits()) {
            if bit {
                *v = src;
            }
        }
    }
    LatentGrid::new(cached_prev.side(), values)
}

/// Re-denoises `trajectory` from level `cfg.start_t_prime`, injecting each
/// character's identity under its (progressively dilated) mask.
pub fn redenoise(
    trajectory: &Trajectory,
    masks: &MaskSet,
    guides: &[CharacterGuide<'_>],
    cfg: &InjectionConfig,
    schedule: &Schedule,
) -> Result<LatentGrid> {
    redenoise_traced(trajectory, masks, guides, cfg, schedule).map(|t| t.latent)
}

/// [`redenoise`] with per-step diagnostics.
///
/// `masks` are at image resolution, an integer multiple of the latent side.
/// At each level the original character masks are dilated by the scheduled
/// kernel, overlaps go to the earlier character, and the result is
/// downsampled to the latent grid before composition.
pub fn redenoise_traced(
    trajectory: &Trajectory,
    masks: &MaskSet,
    guides: &[CharacterGuide<'_>],
    cfg: &InjectionConfig,
    schedule: &Schedule,
) -> Result<InjectionTrace> {
    ensure!(
        guides.len() == masks.len(),
        Config,
        "{} identity guides for {} character masks",
        guides.len(),
        masks.len()
    );
    ensure!(
        trajectory.steps() == schedule.steps(),
        Config,
        "trajectory has {} steps but the schedule has {}",
        trajectory.steps(),
        schedule.steps()
    );
    let t_prime = cfg.start_t_prime;
    ensure!(
        t_prime <= trajectory.steps(),
        Config,
        "start level {t_prime} exceeds the {} cached steps",
        trajectory.steps()
    );
    let latent_side = trajectory.side();
    let image_side = masks.side();
    if image_side % latent_side != 0 {
        return Err(Error::Dimension(format!("mask side {image_side} is not a multiple of latent side {latent_side}")));
    }

    let mut z = trajectory.at_level(t_prime).clone();
    let mut steps = Vec::with_capacity(t_prime);
    let mut final_masks = masks.downsample(latent_side)?;
    let mut cached_kernel: Option<(usize, MaskSet)> = None;

    for level in (1..=t_prime).rev() {
        let kernel = kernel_schedule(level, t_prime, cfg.k_max)?;
        let latent_masks = match &cached_kernel {
            Some((k, m)) if *k == kernel => m.clone(),
            _ => {
                let grown = masks.characters().iter().map(|m| dilate(m, kernel)).collect();
                let m = MaskSet::from_characters(image_side, grown)?.downsample(latent_side)?;
                cached_kernel = Some((kernel, m.clone()));
                m
            }
        };

        let (from, to) = (schedule.timestep(level), schedule.timestep(level - 1));
        let source = match cfg.denoise_source {
            DenoiseSource::Composed => &z,
            DenoiseSource::Cached => trajectory.at_level(level),
        };
        let per_char = guides
            .iter()
            .map(|g| {
                let eps = g.denoiser.predict_noise(&g.condition, Some(&g.identity), source, from)?;
                ddim_step(source, &eps, from, to, schedule)
            })
            .collect::<Result<Vec<_>>>()?;
        z = compose(trajectory.at_level(level - 1), &per_char, &latent_masks)?;

        steps.push(StepTrace {
            level,
            kernel,
            character_cells: latent_masks.characters().iter().map(|m| m.count()).collect(),
            background_cells: latent_masks.background().count(),
        });
        final_masks = latent_masks;
    }
    Ok(InjectionTrace { latent: z, steps, final_masks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{sample_with_cache, OracleDenoiser};
    use crate::injection::Mask;

    fn grid(side: usize, f: impl Fn(usize, usize) -> f64) -> LatentGrid {
        LatentGrid::new(side, (0..side * side).map(|i| f(i % side, i / side)).collect()).unwrap()
    }

    #[test]
    fn compose_examples() {
        let bg = grid(4, |x, y| (x + 4 * y) as f64);
        assert_eq!(compose(&bg, &[], &MaskSet::empty(4)).unwrap(), bg);

        let a = grid(4, |_, _| 1.0);
        let all = MaskSet::from_characters(4, vec![Mask::full(4)]).unwrap();
        assert_eq!(compose(&bg, std::slice::from_ref(&a), &all).unwrap(), a);

        let b = grid(4, |_, _| -2.0);
        let halves =
            MaskSet::from_characters(4, vec![Mask::from_fn(4, |x, _| x < 2), Mask::from_fn(4, |x, _| x >= 2)]).unwrap();
        let out = compose(&bg, &[a, b], &halves).unwrap();
        assert_eq!(out, grid(4, |x, _| if x < 2 { 1.0 } else { -2.0 }));
    }

    #[test]
    fn compose_rejects_bad_inputs() {
        let bg = LatentGrid::zeros(4);
        let one = MaskSet::from_characters(4, vec![Mask::full(4)]).unwrap();
        assert!(compose(&bg, &[], &one).is_err());
        assert!(compose(&bg, &[LatentGrid::zeros(3)], &one).is_err());
    }

    #[test]
    fn no_characters_returns_cached_final() {
        let s = Schedule::default();
        let target = grid(4, |x, y| (x as f64 - y as f64) * 0.2);
        let oracle = OracleDenoiser::new(target, &s);
        let traj = sample_with_cache(&oracle, "", None, 1, 4, &s).unwrap();
        let out = redenoise(&traj, &MaskSet::empty(16), &[], &InjectionConfig::default(), &s).unwrap();
        assert_eq!(&out, traj.final_latent());
    }

    #[test]
    fn start_level_zero_is_a_no_op() {
        let s = Schedule::default();
        let oracle = OracleDenoiser::new(LatentGrid::zeros(4), &s);
        let traj = sample_with_cache(&oracle, "", None, 2, 4, &s).unwrap();
        let other = OracleDenoiser::new(grid(4, |_, _| 1.0), &s);
        let masks = MaskSet::from_characters(8, vec![Mask::full(8)]).unwrap();
        let guide = CharacterGuide { condition: String::new(), identity: vec![1.0], denoiser: &other };
        let cfg = InjectionConfig { start_t_prime: 0, ..Default::default() };
        let out = redenoise_traced(&traj, &masks, &[guide], &cfg, &s).unwrap();
        assert_eq!(&out.latent, traj.final_latent());
        assert!(out.steps.is_empty());
    }

    #[test]
    fn precondition_errors() {
        let s = Schedule::default();
        let oracle = OracleDenoiser::new(LatentGrid::zeros(4), &s);
        let traj = sample_with_cache(&oracle, "", None, 3, 4, &s).unwrap();
        let masks = MaskSet::from_characters(8, vec![Mask::full(8)]).unwrap();
        assert!(redenoise(&traj, &masks, &[], &InjectionConfig::default(), &s).is_err());
        let guide = CharacterGuide { condition: String::new(), identity: vec![], denoiser: &oracle };
        let late = InjectionConfig { start_t_prime: 51, ..Default::default() };
        assert!(redenoise(&traj, &masks, &[guide], &late, &s).is_err());
        let guide = CharacterGuide { condition: String::new(), identity: vec![], denoiser: &oracle };
        let odd = MaskSet::from_characters(6, vec![Mask::full(6)]).unwrap();
        assert!(redenoise(&traj, &odd, &[guide], &InjectionConfig::default(), &s).is_err());
    }
}
