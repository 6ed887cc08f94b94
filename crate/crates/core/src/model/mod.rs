//! Parameters and forward pass of the low-pass graph convolutional recommender.
//!
//! Each layer filters the previous embeddings with a learnable spectral
//! kernel over the passband, applies a transform shared by the user and
//! item sides, and squashes with a sigmoid:
//!
//! ```text
//! U(l) = σ(P̄ diag(k_user(l)) P̄ᵀ U(l−1) T(l))
//! V(l) = σ(Q̄ diag(k_item(l)) Q̄ᵀ V(l−1) T(l))
//! ```
//!
//! Scores are inner products of the concatenated embeddings of every level.
//! With no layers the model is plain matrix factorization.

mod checkpoint;

use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};

use crate::error::{invalid, Error, Result};
use crate::linalg::SpectralBasis;
use crate::spectral::TruncatedBases;

pub(crate) const INIT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub k_user: Array1<f64>,
    pub k_item: Array1<f64>,
    pub transform: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub u0: Array2<f64>,
    pub v0: Array2<f64>,
    pub layers: Vec<LayerParams>,
}

/// How input embeddings are initialized.
#[derive(Clone, Debug)]
pub enum Init {
    Random,
    Pretrained { u0: Array2<f64>, v0: Array2<f64> },
}

impl ModelParams {
    pub fn num_users(&self) -> usize {
        self.u0.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.v0.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.u0.ncols()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `(Φ, Ψ)` read off the kernels, `(0, 0)` without layers.
    pub fn passband(&self) -> (usize, usize) {
        self.layers.first().map_or((0, 0), |l| (l.k_user.len(), l.k_item.len()))
    }

    pub fn is_finite(&self) -> bool {
        self.u0.iter().chain(self.v0.iter()).all(|v| v.is_finite())
            && self.layers.iter().all(|l| {
                l.k_user.iter().chain(l.k_item.iter()).chain(l.transform.iter()).all(|v| v.is_finite())
            })
    }

    /// `‖U0‖² + ‖V0‖² + Σ_l (‖k_user‖² + ‖k_item‖² + ‖T‖²)`.
    pub fn squared_norm(&self) -> f64 {
        fn sq<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
            it.map(|v| v * v).sum()
        }
        let mut total = sq(self.u0.iter()) + sq(self.v0.iter());
        for l in &self.layers {
            total += sq(l.k_user.iter()) + sq(l.k_item.iter()) + sq(l.transform.iter());
        }
        total
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            u0: Array2::zeros(self.u0.raw_dim()),
            v0: Array2::zeros(self.v0.raw_dim()),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    k_user: Array1::zeros(l.k_user.len()),
                    k_item: Array1::zeros(l.k_item.len()),
                    transform: Array2::zeros(l.transform.raw_dim()),
                })
                .collect(),
        }
    }

    /// Parameter tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut out = vec![self.u0.view().into_dyn(), self.v0.view().into_dyn()];
        for l in &self.layers {
            out.push(l.k_user.view().into_dyn());
            out.push(l.k_item.view().into_dyn());
            out.push(l.transform.view().into_dyn());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = vec![self.u0.view_mut().into_dyn(), self.v0.view_mut().into_dyn()];
        for l in &mut self.layers {
            out.push(l.k_user.view_mut().into_dyn());
            out.push(l.k_item.view_mut().into_dyn());
            out.push(l.transform.view_mut().into_dyn());
        }
        out
    }

    /// Names matching [`ModelParams::tensors`], layers numbered from 1.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec!["u0".to_string(), "v0".to_string()];
        for l in 1..=self.layers.len() {
            out.push(format!("k_user{l}"));
            out.push(format!("k_item{l}"));
            out.push(format!("transform{l}"));
        }
        out
    }

    /// Checks shapes against the model dimensions and, if given, the bases.
    pub fn validate(&self, bases: Option<&TruncatedBases>) -> Result<()> {
        let k = self.embed_dim();
        if self.v0.ncols() != k {
            return Err(invalid("user and item embeddings differ in width"));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.transform.dim() != (k, k) {
                return Err(invalid(format!("layer {} transform is not {k}x{k}", l + 1)));
            }
            if let Some(b) = bases {
                if (layer.k_user.len(), layer.k_item.len()) != b.passband() {
                    return Err(invalid(format!(
                        "layer {} kernels ({}, {}) do not match passband {:?}",
                        l + 1,
                        layer.k_user.len(),
                        layer.k_item.len(),
                        b.passband()
                    )));
                }
            }
        }
        if let Some(b) = bases {
            if b.user().dim() != self.num_users() || b.item().dim() != self.num_items() {
                return Err(invalid("bases do not match the number of users/items"));
            }
        }
        if !self.is_finite() {
            return Err(Error::NumericOverflow("model parameters".into()));
        }
        Ok(())
    }
}

/// Draws a fresh model. Embeddings and transform perturbations are
/// `N(0, 0.01²)`; kernels start at one and transforms at the identity.
pub fn init_params(
    m: usize,
    n: usize,
    embed_dim: usize,
    num_layers: usize,
    passband: (usize, usize),
    seed: u64,
    init: Init,
) -> Result<ModelParams> {
    if embed_dim == 0 {
        return Err(invalid("embedding dimension must be at least 1"));
    }
    if num_layers > 0 && (passband.0 == 0 || passband.1 == 0) {
        return Err(invalid("layers need a non-empty passband"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let draw = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
    };
    let (u0, v0) = match init {
        Init::Random => {
            let u0 = draw(m, embed_dim, &mut rng);
            let v0 = draw(n, embed_dim, &mut rng);
            (u0, v0)
        }
        Init::Pretrained { u0, v0 } => {
            if u0.dim() != (m, embed_dim) || v0.dim() != (n, embed_dim) {
                return Err(invalid(format!(
                    "pretrained embeddings {:?}/{:?} do not match {m}x{embed_dim}/{n}x{embed_dim}",
                    u0.dim(),
                    v0.dim()
                )));
            }
            (u0, v0)
        }
    };
    let layers = (0..num_layers)
        .map(|_| LayerParams {
            k_user: Array1::ones(passband.0),
            k_item: Array1::ones(passband.1),
            transform: Array2::eye(embed_dim) + draw(embed_dim, embed_dim, &mut rng),
        })
        .collect();
    Ok(ModelParams { u0, v0, layers })
}

/// Intermediates of one side of one layer.
#[derive(Clone, Debug)]
pub struct LayerCache {
    /// `P̄ᵀ X`, Φ×K.
    pub coeffs: Array2<f64>,
    /// `P̄ diag(k) P̄ᵀ X`, n×K.
    pub filtered: Array2<f64>,
}

/// Every level of both embedding stacks plus what the backward pass needs.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub user_layers: Vec<Array2<f64>>,
    pub item_layers: Vec<Array2<f64>>,
    pub user_inner: Vec<LayerCache>,
    pub item_inner: Vec<LayerCache>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn layer_forward(
    x: ArrayView2<f64>,
    basis: &SpectralBasis,
    kernel: &Array1<f64>,
    transform: &Array2<f64>,
) -> (LayerCache, Array2<f64>) {
    let coeffs = basis.vectors().t().dot(&x);
    let scaled = &coeffs * &kernel.view().insert_axis(Axis(1));
    let filtered = basis.vectors().dot(&scaled);
    let out = filtered.dot(transform).mapv_into(sigmoid);
    (LayerCache { coeffs, filtered }, out)
}

/// Runs every layer. `bases` may be `None` only for a model without layers.
pub fn lcfn_forward(params: &ModelParams, bases: Option<&TruncatedBases>) -> Result<ForwardCache> {
    if !params.layers.is_empty() && bases.is_none() {
        return Err(invalid("graph layers need spectral bases"));
    }
    params.validate(bases)?;
    let mut cache = ForwardCache {
        user_layers: vec![params.u0.clone()],
        item_layers: vec![params.v0.clone()],
        user_inner: Vec::with_capacity(params.layers.len()),
        item_inner: Vec::with_capacity(params.layers.len()),
    };
    for (l, layer) in params.layers.iter().enumerate() {
        let bases = bases.expect("checked above");
        let prev_u = cache.user_layers.last().expect("input level");
        let (ui, u) = layer_forward(prev_u.view(), bases.user(), &layer.k_user, &layer.transform);
        let prev_v = cache.item_layers.last().expect("input level");
        let (vi, v) = layer_forward(prev_v.view(), bases.item(), &layer.k_item, &layer.transform);
        let finite = |a: &Array2<f64>| a.iter().all(|x| x.is_finite());
        if !finite(&ui.filtered) || !finite(&vi.filtered) || !finite(&u) || !finite(&v) {
            return Err(Error::NumericOverflow(format!("layer {}", l + 1)));
        }
        cache.user_layers.push(u);
        cache.item_layers.push(v);
        cache.user_inner.push(ui);
        cache.item_inner.push(vi);
    }
    Ok(cache)
}

impl ForwardCache {
    pub fn num_users(&self) -> usize {
        self.user_layers[0].nrows()
    }

    pub fn num_items(&self) -> usize {
        self.item_layers[0].nrows()
    }

    /// `R̂_ui = Σ_l ⟨U(l)_u, V(l)_i⟩`.
    pub fn score(&self, u: usize, i: usize) -> f64 {
        self.user_layers
            .iter()
            .zip(&self.item_layers)
            .map(|(uu, vv)| uu.row(u).dot(&vv.row(i)))
            .sum()
    }
}

/// Full score matrix `[U(0)..U(L)] [V(0)..V(L)]ᵀ`.
pub fn predict_matrix(cache: &ForwardCache) -> Array2<f64> {
    let mut out = Array2::zeros((cache.num_users(), cache.num_items()));
    for (u, v) in cache.user_layers.iter().zip(&cache.item_layers) {
        ndarray::linalg::general_mat_mul(1.0, u, &v.t(), 1.0, &mut out);
    }
    out
}

/// Scores of every item for user `u`.
pub fn predict_user(cache: &ForwardCache, u: usize) -> Result<Array1<f64>> {
    if u >= cache.num_users() {
        return Err(invalid(format!("user {u} out of range ({} users)", cache.num_users())));
    }
    let mut out = Array1::zeros(cache.num_items());
    for (uu, vv) in cache.user_layers.iter().zip(&cache.item_layers) {
        ndarray::linalg::general_mat_vec_mul(1.0, vv, &uu.row(u), 1.0, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_bases(m: usize, n: usize) -> TruncatedBases {
        let eye = |d: usize| SpectralBasis::new(Array2::eye(d), vec![0.0; d]).unwrap();
        TruncatedBases::new(eye(m), eye(n), 1.0).unwrap()
    }

    #[test]
    fn zero_layers_is_mf() {
        let p = init_params(4, 3, 2, 0, (0, 0), 5, Init::Random).unwrap();
        assert!(p.layers.is_empty());
        let cache = lcfn_forward(&p, None).unwrap();
        assert_eq!(predict_matrix(&cache), p.u0.dot(&p.v0.t()));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(5, 4, 3, 2, (2, 2), 9, Init::Random).unwrap();
        let b = init_params(5, 4, 3, 2, (2, 2), 9, Init::Random).unwrap();
        assert_eq!(a, b);
        let c = init_params(5, 4, 3, 2, (2, 2), 10, Init::Random).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pretrained_shape_checked() {
        let bad = Init::Pretrained { u0: Array2::zeros((3, 2)), v0: Array2::zeros((3, 2)) };
        assert!(init_params(4, 3, 2, 1, (1, 1), 0, bad).is_err());
        let good = Init::Pretrained { u0: Array2::ones((4, 2)), v0: Array2::ones((3, 2)) };
        let p = init_params(4, 3, 2, 1, (1, 1), 0, good).unwrap();
        assert_eq!(p.u0, Array2::<f64>::ones((4, 2)));
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut p = init_params(3, 2, 1, 1, (3, 2), 0, Init::Random).unwrap();
        p.u0.fill(0.0);
        p.layers[0].transform.fill(1.0);
        let cache = lcfn_forward(&p, Some(&full_bases(3, 2))).unwrap();
        assert!(cache.user_layers[1].iter().all(|&v| v == 0.5));
    }

    #[test]
    fn all_ones_scores() {
        let mut p = init_params(3, 2, 2, 2, (3, 2), 0, Init::Random).unwrap();
        let bases = full_bases(3, 2);
        let mut cache = lcfn_forward(&p, Some(&bases)).unwrap();
        for m in cache.user_layers.iter_mut().chain(cache.item_layers.iter_mut()) {
            m.fill(1.0);
        }
        assert!(predict_matrix(&cache).iter().all(|&s| s == 6.0));
        p.u0.fill(0.0);
        assert!(lcfn_forward(&p, None).is_err());
    }

    #[test]
    fn predict_user_matches_matrix() {
        let p = init_params(5, 4, 3, 1, (2, 2), 1, Init::Random).unwrap();
        let eye = |d: usize| SpectralBasis::new(Array2::eye(d), vec![0.0; d]).unwrap();
        let bases = TruncatedBases::from_bases(&eye(5), &eye(4), 0.4).unwrap();
        let cache = lcfn_forward(&p, Some(&bases)).unwrap();
        let full = predict_matrix(&cache);
        for u in 0..5 {
            let row = predict_user(&cache, u).unwrap();
            for i in 0..4 {
                assert!((row[i] - full[[u, i]]).abs() < 1e-12);
                assert!((cache.score(u, i) - full[[u, i]]).abs() < 1e-12);
            }
        }
        assert!(predict_user(&cache, 5).is_err());
    }

    #[test]
    fn zero_user_embedding_gives_zero_scores() {
        let mut p = init_params(2, 3, 2, 0, (0, 0), 1, Init::Random).unwrap();
        p.u0.row_mut(1).fill(0.0);
        let cache = lcfn_forward(&p, None).unwrap();
        assert!(predict_user(&cache, 1).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn overflow_is_reported() {
        let mut p = init_params(3, 2, 1, 1, (3, 2), 0, Init::Random).unwrap();
        p.layers[0].k_user.fill(f64::MAX);
        p.u0.fill(f64::MAX);
        match lcfn_forward(&p, Some(&full_bases(3, 2))) {
            Err(Error::NumericOverflow(what)) => assert_eq!(what, "layer 1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
