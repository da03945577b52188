//! Toy end-to-end story generation.
//!
//! Each character gets a synthetic embedding pool, a discovered identity
//! embedding and an oracle identity denoiser. Each prompt gets a template
//! trajectory from an oracle toward its procedural target, character masks
//! from the upsampled template, and a re-denoising pass that injects the
//! referenced characters.

use idforge_core::diffusion::{character_tokens, identity_target, prompt_to_target};
use idforge_core::injection::{
    background_deviation, boundary_discontinuity, masked_pearson, redenoise_traced, DenoiseSource, InjectionTrace,
    ThresholdSegmenter,
};
use idforge_core::{
    derive_seed, discover_identity, extract_masks, generate_embeddings, sample_with_cache, CharacterGuide,
    DiscoveryConfig, FilterReport, InjectionConfig, LatentGrid, MaskSet, OracleDenoiser, Schedule,
    SyntheticEmbeddingConfig, Trajectory,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Full-resolution masks are this many times the latent side.
pub const MASK_SCALE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySpec {
    pub characters: Vec<String>,
    pub prompts: Vec<String>,
    pub seed: u64,
}

impl StorySpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.prompts.is_empty() {
            return Err(CliError::Config("a story needs at least one prompt".into()));
        }
        for (i, p) in self.prompts.iter().enumerate() {
            if let Some(&bad) = character_tokens(p).iter().find(|&&t| t >= self.characters.len()) {
                return Err(CliError::Config(format!(
                    "prompt {i} references @{bad} but the story has {} character(s)",
                    self.characters.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub latent_side: usize,
    pub injection: InjectionConfig,
    /// Spread of the identity denoiser's clean-image prior around its target.
    pub prior_std: f64,
    pub samples: usize,
    pub contamination: f64,
    pub discovery: DiscoveryConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            latent_side: 32,
            injection: InjectionConfig::default(),
            prior_std: DEFAULT_PRIOR_STD,
            samples: 64,
            contamination: 0.3,
            discovery: DiscoveryConfig::default(),
        }
    }
}

pub const DEFAULT_PRIOR_STD: f64 = 0.3;

pub struct Character {
    pub name: String,
    pub report: FilterReport,
    pub target: LatentGrid,
    pub denoiser: OracleDenoiser,
}

pub fn build_character(
    name: &str,
    story_seed: u64,
    cfg: &SimulationConfig,
    schedule: &Schedule,
) -> CliResult<Character> {
    let pool_cfg = SyntheticEmbeddingConfig {
        samples: cfg.samples,
        contamination: cfg.contamination,
        num_identities: 1,
        seed: derive_seed(story_seed, &format!("character:{name}")),
        ..Default::default()
    };
    let pool = generate_embeddings(&pool_cfg)?.remove(0);
    let report = discover_identity(&pool.embeddings, &cfg.discovery)?;
    let target = identity_target(&report.final_embedding, cfg.latent_side);
    let denoiser = OracleDenoiser::new(target.clone(), schedule).with_prior_std(cfg.prior_std);
    Ok(Character { name: name.to_string(), report, target, denoiser })
}

pub struct Template {
    pub prompt: String,
    /// Story character index per mask, in mask order.
    pub cast: Vec<usize>,
    pub trajectory: Trajectory,
    /// Full-resolution layout.
    pub masks: MaskSet,
}

pub fn build_template(
    prompt: &str,
    index: usize,
    story_seed: u64,
    cfg: &SimulationConfig,
    schedule: &Schedule,
) -> CliResult<Template> {
    let side = cfg.latent_side;
    let target = prompt_to_target(prompt, side, story_seed);
    let general = OracleDenoiser::new(target, schedule);
    let seed = derive_seed(story_seed, &format!("prompt:{index}"));
    let trajectory = sample_with_cache(&general, prompt, None, seed, side, schedule)?;
    let cast = character_tokens(prompt);
    let image = trajectory.final_latent().upsample(MASK_SCALE);
    let masks = extract_masks(&image, cast.len(), &ThresholdSegmenter::default())?;
    Ok(Template { prompt: prompt.to_string(), cast, trajectory, masks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterScore {
    pub character: usize,
    /// Correlation with the character's identity target over its original mask.
    pub identity_correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub trace: InjectionTrace,
    pub scores: Vec<CharacterScore>,
    /// Mean absolute change against the cached final latent over the original background.
    pub background_deviation: f64,
    /// Largest jump across the final composition boundary.
    pub seam: f64,
}

pub fn render_shot(
    template: &Template,
    characters: &[Character],
    injection: &InjectionConfig,
    schedule: &Schedule,
) -> CliResult<Shot> {
    let guides: Vec<CharacterGuide<'_>> = template
        .cast
        .iter()
        .map(|&c| CharacterGuide {
            condition: template.prompt.clone(),
            identity: characters[c].report.final_embedding.clone(),
            denoiser: &characters[c].denoiser,
        })
        .collect();
    let trace = redenoise_traced(&template.trajectory, &template.masks, &guides, injection, schedule)?;
    let original = template.masks.downsample(template.trajectory.side())?;
    let cached = template.trajectory.final_latent();
    let scores = template
        .cast
        .iter()
        .zip(original.characters())
        .map(|(&c, m)| {
            Ok(CharacterScore {
                character: c,
                identity_correlation: masked_pearson(&trace.latent, &characters[c].target, m)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let background_deviation = background_deviation(&trace.latent, cached, original.background())?;
    let seam = boundary_discontinuity(&trace.latent, &trace.final_masks.foreground())?;
    Ok(Shot { trace, scores, background_deviation, seam })
}

/// Everything needed to render a story under varying injection settings.
pub struct Story {
    pub spec: StorySpec,
    pub characters: Vec<Character>,
    pub templates: Vec<Template>,
}

impl Story {
    pub fn prepare(spec: StorySpec, cfg: &SimulationConfig, schedule: &Schedule) -> CliResult<Self> {
        spec.validate()?;
        let characters = spec
            .characters
            .iter()
            .map(|name| build_character(name, spec.seed, cfg, schedule))
            .collect::<CliResult<Vec<_>>>()?;
        let templates = spec
            .prompts
            .iter()
            .enumerate()
            .map(|(i, p)| build_template(p, i, spec.seed, cfg, schedule))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Self { spec, characters, templates })
    }

    pub fn render(&self, injection: &InjectionConfig, schedule: &Schedule) -> CliResult<Vec<Shot>> {
        self.templates.iter().map(|t| render_shot(t, &self.characters, injection, schedule)).collect()
    }
}

/// Story-level means for one injection setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t_prime: usize,
    pub background_deviation: f64,
    pub identity_correlation: f64,
    pub seam: f64,
}

pub fn summarize(t_prime: usize, shots: &[Shot]) -> SweepPoint {
    let n = shots.len().max(1) as f64;
    let corr: Vec<f64> = shots.iter().flat_map(|s| s.scores.iter().map(|c| c.identity_correlation)).collect();
    SweepPoint {
        t_prime,
        background_deviation: shots.iter().map(|s| s.background_deviation).sum::<f64>() / n,
        identity_correlation: if corr.is_empty() { 0.0 } else { corr.iter().sum::<f64>() / corr.len() as f64 },
        seam: shots.iter().map(|s| s.seam).sum::<f64>() / n,
    }
}

pub fn sweep(
    story: &Story,
    base: &InjectionConfig,
    t_primes: &[usize],
    schedule: &Schedule,
) -> CliResult<Vec<SweepPoint>> {
    t_primes
        .iter()
        .map(|&t| {
            let cfg = InjectionConfig { start_t_prime: t, ..*base };
            Ok(summarize(t, &story.render(&cfg, schedule)?))
        })
        .collect()
}

pub fn parse_denoise_source(s: &str) -> Result<DenoiseSource, String> {
    match s {
        "composed" => Ok(DenoiseSource::Composed),
        "cached" => Ok(DenoiseSource::Cached),
        other => Err(format!("unknown denoise source {other:?}; expected composed or cached")),
    }
}
