#![allow(dead_code)]

use std::collections::BTreeSet;

use lcfn_core::evaluation::{Phase, SplitData};
use lcfn_core::hypergraph::user_item_laplacians;
use lcfn_core::linalg::dense_symmetric_eig;
use lcfn_core::model::{init_params, Init, ModelParams};
use lcfn_core::spectral::TruncatedBases;
use lcfn_core::training::{bpr_loss, gradients, sample_triples, Triple};
use lcfn_core::{InteractionSet, SparseBinaryMatrix, SpectralBasis};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `m×n` bipartite pairs where every user and item has a pair.
pub fn random_pairs(m: usize, n: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|u| (0..n).map(move |i| (u, i)))
        .filter(|_| rng.random::<f64>() < density)
        .collect();
    for u in 0..m {
        pairs.push((u, rng.random_range(0..n)));
    }
    for i in 0..n {
        pairs.push((rng.random_range(0..m), i));
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

pub fn random_matrix(m: usize, n: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseBinaryMatrix {
    SparseBinaryMatrix::from_pairs(m, n, &random_pairs(m, n, density, rng)).unwrap()
}

pub fn random_set(m: usize, n: usize, density: f64, rng: &mut ChaCha8Rng) -> InteractionSet {
    InteractionSet::from_indices(m, n, random_pairs(m, n, density, rng)).unwrap()
}

/// Complete user and item bases by dense decomposition.
pub fn full_bases(r: &SparseBinaryMatrix) -> (SpectralBasis, SpectralBasis) {
    let (lu, li) = user_item_laplacians(r).unwrap();
    (
        dense_symmetric_eig(lu.to_dense().unwrap().view()).unwrap(),
        dense_symmetric_eig(li.to_dense().unwrap().view()).unwrap(),
    )
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub const FD_STEP: f64 = 1e-5;

/// M=12, N=9, K=4, L=2, Φ=6, Ψ=5 with perturbed kernels so every path matters.
pub fn gradient_fixture(seed: u64) -> (ModelParams, TruncatedBases, Vec<Triple>) {
    let mut rng = rng(seed);
    let set = random_set(12, 9, 0.3, &mut rng);
    let r = lcfn_core::hypergraph::build_interaction_matrix(&set);
    let (pu, qi) = full_bases(&r);
    let bases = TruncatedBases::from_bases(&pu, &qi, 0.5).unwrap();
    assert_eq!(bases.passband(), (6, 5));
    let mut params = init_params(12, 9, 4, 2, (6, 5), seed, Init::Random).unwrap();
    // Larger embeddings keep the sigmoids away from their linear regime.
    params.u0.mapv_inplace(|v| v * 50.0);
    params.v0.mapv_inplace(|v| v * 50.0);
    for layer in &mut params.layers {
        layer.k_user.mapv_inplace(|_| rng.random_range(0.5..1.5));
        layer.k_item.mapv_inplace(|_| rng.random_range(0.5..1.5));
        layer.transform.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
    }
    let triples = sample_triples(&set, 1, &mut rng).triples;
    (params, bases, triples)
}

/// Worst relative error per tensor, `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_errors(params: &ModelParams, bases: &TruncatedBases, triples: &[Triple], lambda: f64) -> Vec<(String, f64)> {
    let analytic = gradients(params, Some(bases), triples, lambda).unwrap();
    let names = params.tensor_names();
    let mut out = Vec::new();
    for (t, name) in names.iter().enumerate() {
        let len = params.tensors()[t].len();
        let mut worst: f64 = 0.0;
        for e in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t].as_slice_mut().unwrap()[e] += FD_STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[t].as_slice_mut().unwrap()[e] -= FD_STEP;
            let fp = bpr_loss(&plus, Some(bases), triples, lambda).unwrap();
            let fm = bpr_loss(&minus, Some(bases), triples, lambda).unwrap();
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let a = analytic.tensors()[t].as_slice().unwrap()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        out.push((name.clone(), worst));
    }
    out
}

/// Small block-structured dataset split with the default ratios.
pub fn synthetic_split(m: usize, n: usize, seed: u64) -> (lcfn_core::evaluation::SplitData, TruncatedBases) {
    use lcfn_core::evaluation::{generate_synthetic, split, SyntheticConfig, DEFAULT_RATIOS};
    let cfg = SyntheticConfig { num_users: m, num_items: n, exposure_rate: 0.5, seed, ..Default::default() };
    let data = generate_synthetic(&cfg).unwrap().interactions().unwrap();
    let data = lcfn_core::hypergraph::ncore_filter(&data, 2, 2).unwrap();
    let parts = split(&data, DEFAULT_RATIOS, seed).unwrap();
    let r = lcfn_core::hypergraph::build_interaction_matrix(&parts.train);
    let bases = lcfn_core::spectral::passband_bases(&r, 0.2, seed).unwrap();
    (parts, bases)
}

pub fn index_set(pairs: &[(usize, usize)], m: usize, n: usize) -> InteractionSet {
    InteractionSet::from_indices(m, n, pairs.to_vec()).unwrap()
}

/// Five users over six items; user 4 has nothing in the test set.
pub fn metric_toy() -> (SplitData, Array2<f64>) {
    let train = index_set(&[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (0, 5), (1, 5), (2, 5), (3, 5), (4, 5)], 5, 6);
    let validation = index_set(&[(0, 1), (2, 0)], 5, 6);
    let test = index_set(&[(0, 2), (1, 0), (1, 3), (2, 1), (2, 3), (2, 4), (3, 4)], 5, 6);
    let scores = array![
        [9.0, 8.0, 7.0, 1.0, 0.5, 9.9],
        [0.1, 5.0, 0.3, 0.2, 0.4, 6.0],
        [0.0, 0.3, 0.0, 0.3, 0.3, 0.0],
        [0.2, 0.9, 0.8, 3.0, 0.85, 0.0],
        [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
    ];
    (SplitData::from_parts(train, validation, test, 0).unwrap(), scores)
}

/// Per-user metrics from first principles: full sort, explicit formulas.
pub fn metric_oracle(split: &SplitData, scores: &Array2<f64>, phase: Phase, k: usize) -> Vec<Option<(f64, f64)>> {
    let (m, n) = scores.dim();
    let target = match phase {
        Phase::Validation => &split.validation,
        Phase::Test => &split.test,
    };
    (0..m)
        .map(|u| {
            let relevant: BTreeSet<usize> = target.pairs().iter().filter(|p| p.0 == u).map(|p| p.1).collect();
            if relevant.is_empty() {
                return None;
            }
            let mut hidden: BTreeSet<usize> = split.train.pairs().iter().filter(|p| p.0 == u).map(|p| p.1).collect();
            if phase == Phase::Test {
                hidden.extend(split.validation.pairs().iter().filter(|p| p.0 == u).map(|p| p.1));
            }
            let mut order: Vec<usize> = (0..n).filter(|i| !hidden.contains(i)).collect();
            order.sort_by(|a, b| scores[[u, *b]].total_cmp(&scores[[u, *a]]).then(a.cmp(b)));
            order.truncate(k);
            let hits: Vec<usize> = (0..order.len()).filter(|&p| relevant.contains(&order[p])).collect();
            let h = hits.len() as f64;
            let f1 = if h == 0.0 {
                0.0
            } else {
                let (p, r) = (h / k as f64, h / relevant.len() as f64);
                2.0 * p * r / (p + r)
            };
            let dcg: f64 = hits.iter().map(|&p| 1.0 / ((p + 2) as f64).log2()).sum();
            let idcg: f64 = (0..k.min(relevant.len())).map(|p| 1.0 / ((p + 2) as f64).log2()).sum();
            Some((f1, dcg / idcg))
        })
        .collect()
}
