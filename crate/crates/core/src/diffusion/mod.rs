//! Deterministic DDIM sampling with closed-form oracle denoisers.
//!
//! Trajectories are cached in full so a later pass can restart denoising from
//! any intermediate level.

mod denoiser;
mod latent;
mod sampler;
mod schedule;
pub(crate) mod target;

pub use denoiser::{Denoiser, OracleDenoiser};
pub use latent::LatentGrid;
pub use sampler::{ddim_step, sample_with_cache, Trajectory};
pub use schedule::{make_schedule, Schedule, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_STEPS, DEFAULT_TRAIN_STEPS};
pub use target::{character_tokens, identity_target, prompt_to_target};
