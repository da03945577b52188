//! Procedural stand-ins for generated content.
//!
//! A prompt maps to a smooth background plus one bright blob per character
//! token; an identity embedding maps to a seeded bump pattern covering the
//! whole grid.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::LatentGrid;

const BACKGROUND_WAVES: usize = 6;
const BACKGROUND_AMPLITUDE: f64 = 0.3;
const BLOB_PEAK: f64 = 0.85;
const IDENTITY_BUMPS: usize = 14;

pub(crate) fn hash_seed(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Character indices referenced as `@<n>` in a prompt, unique, in order of
/// first appearance.
pub fn character_tokens(prompt: &str) -> Vec<usize> {
    let bytes = prompt.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'@' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end > start {
                if let Ok(n) = prompt[start..end].parse::<usize>() {
                    if !out.contains(&n) {
                        out.push(n);
                    }
                }
            }
            i = end.max(i + 1);
        } else {
            i += 1;
        }
    }
    out
}

/// Deterministic clean image for a prompt, values in `[-1, 1]`.
///
/// Blobs are spread left to right in token order, so the `j`-th leftmost blob
/// belongs to the `j`-th distinct character token.
pub fn prompt_to_target(prompt: &str, side: usize, seed: u64) -> LatentGrid {
    let side = side.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(hash_seed(&[b"prompt", &seed.to_le_bytes(), prompt.as_bytes()]));
    let waves: Vec<(f64, f64, f64, f64)> = (0..BACKGROUND_WAVES)
        .map(|_| {
            let fx = rng.random_range(-3.0..3.0);
            let fy = rng.random_range(-3.0..3.0);
            let phase = rng.random_range(0.0..TAU);
            let amp = rng.random_range(0.5..1.0);
            (fx, fy, phase, amp)
        })
        .collect();
    let amp_norm: f64 = waves.iter().map(|w| w.3).sum();

    let n = character_tokens(prompt).len();
    let s = side as f64;
    let base_radius = s * (0.35 / n.max(1) as f64).min(0.18);
    let blobs: Vec<(f64, f64, f64)> = (0..n)
        .map(|j| {
            let cx = s * (j as f64 + 0.5) / n as f64 + rng.random_range(-0.03..0.03) * s;
            let cy = s * (0.5 + rng.random_range(-0.1..0.1));
            let r = base_radius * rng.random_range(0.9..1.1);
            (cx, cy, r)
        })
        .collect();

    LatentGrid::from_fn(side, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / s, (y as f64 + 0.5) / s);
        let mut val: f64 = waves.iter().map(|(fx, fy, ph, a)| a * (TAU * (fx * u + fy * v) + ph).sin()).sum::<f64>()
            * BACKGROUND_AMPLITUDE
            / amp_norm;
        for &(cx, cy, r) in &blobs {
            let d2 = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)) / (r * r);
            val += BLOB_PEAK * (-d2 * d2).exp();
        }
        val.clamp(-1.0, 1.0)
    })
}

/// Seeded face-like bump pattern derived from an identity embedding, scaled
/// to max-abs 1.
pub fn identity_target(embedding: &[f64], side: usize) -> LatentGrid {
    let side = side.max(1);
    let bytes: Vec<u8> = embedding.iter().flat_map(|v| v.to_le_bytes()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hash_seed(&[b"identity", &bytes]));
    let s = side as f64;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..IDENTITY_BUMPS)
        .map(|_| {
            let cx = rng.random_range(0.0..s);
            let cy = rng.random_range(0.0..s);
            let width = s * rng.random_range(0.06..0.16);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (cx, cy, width, sign * rng.random_range(0.5..1.0))
        })
        .collect();
    let (fx, fy, phase) = (rng.random_range(2.0..5.0), rng.random_range(2.0..5.0), rng.random_range(0.0..TAU));
    let raw = LatentGrid::from_fn(side, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let texture = 0.3 * (TAU * (fx * px + fy * py) / s + phase).sin();
        texture
            + bumps
                .iter()
                .map(|&(cx, cy, w, a)| a * (-((px - cx).powi(2) + (py - cy).powi(2)) / (2.0 * w * w)).exp())
                .sum::<f64>()
    });
    let peak = raw.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        raw.scale(1.0 / peak)
    } else {
        raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_parsing() {
        assert_eq!(character_tokens("@1 meets @0, then @1 waves"), vec![1, 0]);
        assert_eq!(character_tokens("no characters @ all"), Vec::<usize>::new());
        assert_eq!(character_tokens("email@12x"), vec![12]);
    }

    #[test]
    fn prompt_target_is_deterministic_and_bounded() {
        let a = prompt_to_target("@0 walks in the park", 32, 7);
        assert_eq!(a, prompt_to_target("@0 walks in the park", 32, 7));
        assert!(a.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        let b = prompt_to_target("@0 runs in the park", 32, 7);
        assert!(a.max_abs_diff(&b).unwrap() > 0.0);
    }

    #[test]
    fn empty_prompt_has_no_blobs() {
        let bg = prompt_to_target("", 32, 3);
        assert!(bg.values().iter().all(|v| v.abs() <= BACKGROUND_AMPLITUDE + 1e-12));
        let with_blob = prompt_to_target("@0", 32, 3);
        assert!(with_blob.values().iter().any(|&v| v > BACKGROUND_AMPLITUDE + 0.3));
    }

    #[test]
    fn identity_target_depends_on_embedding() {
        let a = identity_target(&[0.1, 0.2, 0.3], 16);
        assert_eq!(a, identity_target(&[0.1, 0.2, 0.3], 16));
        assert!(a.max_abs_diff(&identity_target(&[0.1, 0.2, 0.30001], 16)).unwrap() > 0.0);
        let peak = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 1e-12);
    }
}
