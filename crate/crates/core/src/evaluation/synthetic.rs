//! Synthetic implicit feedback from a known preference matrix.
//!
//! A block-structured preference matrix `R0` is corrupted twice: entries are
//! hidden at random (exposure noise) and the exposed ones are thresholded
//! into 0/1 interactions (quantization noise).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hypergraph::InteractionSet;
use crate::linalg::SparseBinaryMatrix;

const MAX_ATTEMPTS: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub communities: usize,
    /// Mean preference inside a user's own community.
    pub in_block: f64,
    /// Mean preference across communities.
    pub out_block: f64,
    /// Per-user and per-item affinities are drawn from `[1 − spread, 1]`.
    pub affinity_spread: f64,
    /// Standard deviation of the preference jitter seen at quantization.
    pub preference_noise: f64,
    /// Probability that an entry is exposed.
    pub exposure_rate: f64,
    pub quantize_threshold: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_users: 200,
            num_items: 100,
            communities: 4,
            in_block: 0.9,
            out_block: 0.1,
            affinity_spread: 0.2,
            preference_noise: 0.1,
            exposure_rate: 0.3,
            quantize_threshold: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_items == 0 || self.communities == 0 {
            return Err(invalid("synthetic sizes must be positive"));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("in_block", self.in_block)?;
        unit("out_block", self.out_block)?;
        unit("affinity_spread", self.affinity_spread)?;
        unit("exposure_rate", self.exposure_rate)?;
        unit("quantize_threshold", self.quantize_threshold)?;
        if self.preference_noise.is_nan() || self.preference_noise < 0.0 {
            return Err(invalid("preference noise must be non-negative"));
        }
        Ok(())
    }

    pub fn user_community(&self, u: usize) -> usize {
        u * self.communities / self.num_users
    }

    pub fn item_community(&self, i: usize) -> usize {
        i * self.communities / self.num_items
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    /// True preferences in `[0, 1]`.
    pub r0: Array2<f64>,
    /// Observed interactions.
    pub r: SparseBinaryMatrix,
    /// Which entries were exposed.
    pub exposed: Array2<bool>,
}

impl SyntheticData {
    /// Observed pairs over all users and items (ids `"0".."M-1"`).
    pub fn interactions(&self) -> Result<InteractionSet> {
        InteractionSet::from_indices(self.r.rows(), self.r.cols(), self.r.iter().collect())
    }

    /// Exposure noise `N1 = −R0` on hidden entries.
    pub fn exposure_noise(&self) -> Array2<f64> {
        Array2::from_shape_fn(self.r0.raw_dim(), |(u, i)| {
            if self.exposed[[u, i]] {
                0.0
            } else {
                -self.r0[[u, i]]
            }
        })
    }

    /// Quantization noise `N2 = R − R0 − N1`.
    pub fn quantization_noise(&self) -> Array2<f64> {
        self.r.to_dense() - &self.r0 - self.exposure_noise()
    }
}

/// Draws one synthetic dataset; retries with derived seeds if nothing is observed.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let data = draw(cfg, cfg.seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        if data.r.nnz() > 0 {
            return Ok(data);
        }
        log::warn!("synthetic draw {attempt} produced no interactions, regenerating");
    }
    Err(Error::GenerationFailure(format!(
        "no interactions after {MAX_ATTEMPTS} attempts (exposure rate {})",
        cfg.exposure_rate
    )))
}

fn draw(cfg: &SyntheticConfig, seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = (cfg.num_users, cfg.num_items);
    let user_aff: Vec<f64> =
        (0..m).map(|_| 1.0 - cfg.affinity_spread * rng.random::<f64>()).collect();
    let item_aff: Vec<f64> =
        (0..n).map(|_| 1.0 - cfg.affinity_spread * rng.random::<f64>()).collect();
    let r0 = Array2::from_shape_fn((m, n), |(u, i)| {
        let base = if cfg.user_community(u) == cfg.item_community(i) {
            cfg.in_block
        } else {
            cfg.out_block
        };
        base * user_aff[u] * item_aff[i]
    });

    let jitter = Normal::new(0.0, cfg.preference_noise.max(f64::MIN_POSITIVE)).expect("std");
    let mut exposed = Array2::from_elem((m, n), false);
    let mut pairs = Vec::new();
    for u in 0..m {
        for i in 0..n {
            let seen = rng.random::<f64>() < cfg.exposure_rate;
            let noise = if cfg.preference_noise > 0.0 { jitter.sample(&mut rng) } else { 0.0 };
            exposed[[u, i]] = seen;
            if seen && r0[[u, i]] + noise > cfg.quantize_threshold {
                pairs.push((u, i));
            }
        }
    }
    let r = SparseBinaryMatrix::from_pairs(m, n, &pairs).expect("in range");
    SyntheticData { r0, r, exposed }
}
