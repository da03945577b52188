//! Seeded synthetic identity embeddings with planted contamination.
//!
//! Each identity has a random unit centre and a low-dimensional variation
//! subspace orthogonal to it (pose, expression). Inlier rows are the centre
//! plus Gaussian variation inside that subspace plus a little isotropic noise,
//! unit-normalised. Contaminating rows are drawn the same way around another
//! identity's centre.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::target::hash_seed;
use crate::discovery::EmbeddingMatrix;
use crate::error::{ensure, Result};
use crate::matrix::{dot, Matrix};

/// Extra centres used for contamination when only one identity is generated.
const DISTRACTORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEmbeddingConfig {
    pub dim: usize,
    pub samples: usize,
    /// Per-direction standard deviation inside the variation subspace.
    pub sigma_in: f64,
    pub subspace_dim: usize,
    pub ambient_std: f64,
    /// Fraction of rows drawn around another identity, in `[0, 1)`.
    pub contamination: f64,
    pub num_identities: usize,
    pub seed: u64,
}

impl Default for SyntheticEmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 512,
            samples: 64,
            sigma_in: 0.1,
            subspace_dim: 8,
            ambient_std: 0.005,
            contamination: 0.3,
            num_identities: 4,
            seed: 0,
        }
    }
}

impl SyntheticEmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.dim >= 2, Config, "dimension must be at least 2");
        ensure!(self.samples >= 1, Config, "at least one sample per identity is required");
        ensure!(self.num_identities >= 1, Config, "at least one identity is required");
        ensure!(self.sigma_in > 0.0, Config, "sigma_in must be positive, got {}", self.sigma_in);
        ensure!(self.ambient_std >= 0.0, Config, "ambient_std must be nonnegative");
        ensure!(
            (0.0..1.0).contains(&self.contamination),
            Config,
            "contamination must lie in [0, 1), got {}",
            self.contamination
        );
        ensure!(
            self.subspace_dim < self.dim,
            Config,
            "subspace dimension {} does not fit in dimension {}",
            self.subspace_dim,
            self.dim
        );
        Ok(())
    }

    /// Number of contaminated rows per identity.
    pub fn contaminated_rows(&self) -> usize {
        (self.contamination * self.samples as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticIdentity {
    pub embeddings: EmbeddingMatrix,
    /// Ground truth: `true` for rows drawn around this identity's centre.
    pub inlier: Vec<bool>,
    pub center: Vec<f64>,
}

struct Identity {
    center: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn make_identity(rng: &mut ChaCha8Rng, cfg: &SyntheticEmbeddingConfig) -> Identity {
    let center = unit_gaussian(rng, cfg.dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cfg.subspace_dim);
    while basis.len() < cfg.subspace_dim {
        let mut v = unit_gaussian(rng, cfg.dim);
        for _ in 0..2 {
            for u in std::iter::once(&center).chain(basis.iter()) {
                let p = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    Identity { center, basis }
}

fn draw_row(rng: &mut ChaCha8Rng, id: &Identity, cfg: &SyntheticEmbeddingConfig) -> Vec<f64> {
    let mut row = id.center.clone();
    for b in &id.basis {
        let g: f64 = rng.sample(StandardNormal);
        row.iter_mut().zip(b).for_each(|(x, y)| *x += cfg.sigma_in * g * y);
    }
    for x in row.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *x += cfg.ambient_std * g;
    }
    let n = dot(&row, &row).sqrt();
    row.iter_mut().for_each(|x| *x /= n);
    row
}

/// Generates `num_identities` embedding sets of `samples` rows each.
pub fn generate_embeddings(cfg: &SyntheticEmbeddingConfig) -> Result<Vec<SyntheticIdentity>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hash_seed(&[b"centers", &cfg.seed.to_le_bytes()]));
    let extra = if cfg.num_identities == 1 { DISTRACTORS } else { 0 };
    let identities: Vec<Identity> = (0..cfg.num_identities + extra).map(|_| make_identity(&mut rng, cfg)).collect();

    let n_bad = cfg.contaminated_rows();
    (0..cfg.num_identities)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(hash_seed(&[
                b"identity",
                &cfg.seed.to_le_bytes(),
                &(i as u64).to_le_bytes(),
            ]));
            let mut positions: Vec<usize> = (0..cfg.samples).collect();
            positions.shuffle(&mut rng);
            let mut inlier = vec![true; cfg.samples];
            positions[..n_bad].iter().for_each(|&p| inlier[p] = false);

            let others: Vec<usize> = (0..identities.len()).filter(|&o| o != i).collect();
            let mut values = Vec::with_capacity(cfg.samples * cfg.dim);
            for &is_in in &inlier {
                let source = if is_in { i } else { others[rng.random_range(0..others.len())] };
                values.extend(draw_row(&mut rng, &identities[source], cfg));
            }
            Ok(SyntheticIdentity {
                embeddings: EmbeddingMatrix::new(Matrix::from_vec(cfg.samples, cfg.dim, values)?)?,
                inlier,
                center: identities[i].center.clone(),
            })
        })
        .collect()
}

/// Stable 64-bit seed for a labelled sub-task of a seeded run.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    hash_seed(&[&seed.to_le_bytes(), label.as_bytes()])
}

/// Fraction of `kept_ids` that are ground-truth inliers, and the fraction of
/// all inliers that were kept.
pub fn precision_recall(kept_ids: &[usize], inlier: &[bool]) -> (f64, f64) {
    let hits = kept_ids.iter().filter(|&&i| inlier[i]).count() as f64;
    let total = inlier.iter().filter(|&&b| b).count() as f64;
    let precision = if kept_ids.is_empty() { 0.0 } else { hits / kept_ids.len() as f64 };
    let recall = if total == 0.0 { 0.0 } else { hits / total };
    (precision, recall)
}
