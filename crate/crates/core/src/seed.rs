//! Named random sub-streams derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const SPLIT: &str = "split";
pub const INIT: &str = "init";
pub const SAMPLER: &str = "sampler";
pub const EIGEN: &str = "eigen";

/// Seed of stream `name`; independent streams for distinct names.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Seed of the `index`-th draw of stream `name`, e.g. one per epoch.
pub fn indexed(seed: u64, name: &str, index: u64) -> u64 {
    substream(substream(seed, name), &index.to_string())
}

pub fn rng(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(seed, name))
}
