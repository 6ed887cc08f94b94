//! Fixtures shared by the benchmarks.

use lcfn_core::evaluation::{generate_synthetic, split, SplitData, SyntheticConfig, DEFAULT_RATIOS};
use lcfn_core::hypergraph::build_interaction_matrix;
use lcfn_core::spectral::{passband_bases, TruncatedBases};
use lcfn_core::{InteractionSet, SparseBinaryMatrix};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform random interactions; every user and item keeps at least one.
pub fn random_interactions(m: usize, n: usize, density: f64, seed: u64) -> InteractionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|u| (0..n).map(move |i| (u, i)))
        .filter(|_| rng.random_bool(density))
        .collect();
    pairs.extend((0..m).map(|u| (u, u % n)));
    pairs.extend((0..n).map(|i| (i % m, i)));
    pairs.sort_unstable();
    pairs.dedup();
    InteractionSet::from_indices(m, n, pairs).expect("indices in range")
}

pub fn random_matrix(m: usize, n: usize, density: f64, seed: u64) -> SparseBinaryMatrix {
    build_interaction_matrix(&random_interactions(m, n, density, seed))
}

pub fn random_embeddings(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-0.1..0.1))
}

/// Synthetic split of the given size with passband bases at ratio `f`.
pub fn synthetic_with_bases(m: usize, n: usize, f: f64) -> (SplitData, TruncatedBases) {
    let cfg = SyntheticConfig { num_users: m, num_items: n, ..Default::default() };
    let set = generate_synthetic(&cfg).expect("valid config").interactions().expect("non-empty");
    let parts = split(&set, DEFAULT_RATIOS, 0).expect("splittable");
    let bases = passband_bases(&build_interaction_matrix(&parts.train), f, 0).expect("spectrum");
    (parts, bases)
}
