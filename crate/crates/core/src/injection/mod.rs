//! Mask-guided re-denoising identity injection.
//!
//! Character layouts come from thresholding the template image. Starting from
//! an intermediate cached latent, every character region is re-denoised by
//! its own identity denoiser while background cells keep following the
//! cached trajectory. Character masks grow by dilation as denoising proceeds.

mod mask;
mod metrics;
mod morphology;
mod redenoise;
mod segment;

pub use mask::{Mask, MaskSet};
pub use metrics::{background_deviation, boundary_discontinuity, masked_pearson, pearson};
pub use morphology::{dilate, downsample_mask, kernel_schedule};
pub use redenoise::{
    compose, redenoise, redenoise_traced, CharacterGuide, DenoiseSource, InjectionConfig, InjectionTrace, StepTrace,
    DEFAULT_K_MAX, DEFAULT_T_PRIME,
};
pub use segment::{connected_components, extract_masks, Segmenter, ThresholdSegmenter};
