//! Model-free building blocks for consistent-character story generation.
//!
//! - [`discovery`]: SVD-based iterative filtering of identity embeddings.
//! - [`baselines`]: LOF, DBSCAN and Mahalanobis compactness for comparison.
//! - [`diffusion`]: a deterministic DDIM sampler with trajectory caching and
//!   closed-form oracle denoisers.
//! - [`injection`]: layout extraction, progressive mask dilation and
//!   mask-guided re-denoising over a cached trajectory.
//! - [`synth`]: seeded synthetic embedding sets.

pub mod baselines;
pub mod diffusion;
pub mod discovery;
mod error;
pub mod injection;
pub mod matrix;
pub mod svd;
pub mod synth;

pub use diffusion::{
    ddim_step, make_schedule, sample_with_cache, Denoiser, LatentGrid, OracleDenoiser, Schedule, Trajectory,
};
pub use discovery::{
    discover_identity, filter_once, naive_average, reconstruction_errors, reconstruction_matrix, DiscoveryConfig,
    EmbeddingMatrix, FilterReport, IterationRecord, RankSelection,
};
pub use error::{Error, Result};
pub use injection::{
    compose, dilate, downsample_mask, extract_masks, kernel_schedule, redenoise, CharacterGuide, InjectionConfig, Mask,
    MaskSet,
};
pub use matrix::{mat_mul, mean_row, Matrix};
pub use svd::{thin_svd, SvdFactors};
pub use synth::{derive_seed, generate_embeddings, SyntheticEmbeddingConfig, SyntheticIdentity};
