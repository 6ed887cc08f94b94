//! Two-dimensional graph Fourier transform, the low-pass collaborative
//! filter and low-pass graph convolution.
//!
//! A user basis `P̄` (M×Φ) and an item basis `Q̄` (N×Ψ) span the passband.
//! Truncating the bases is the gate filter: every spectral coefficient
//! outside the lowest Φ×Ψ block is dropped without ever being computed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid, Result};
use crate::hypergraph::user_item_laplacians;
use crate::linalg::{
    dense_symmetric_eig, default_max_restarts, lanczos_smallest, SparseBinaryMatrix,
    SparseSymmetricOperator, SpectralBasis, DEFAULT_TOL,
};

pub mod demo;

/// Passband sizes `(Φ, Ψ) = (⌈f·m⌉, ⌈f·n⌉)`, each at least 1.
pub fn cutoff_counts(f: f64, m: usize, n: usize) -> Result<(usize, usize)> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(invalid(format!("cutoff ratio {f} outside (0, 1]")));
    }
    if m == 0 || n == 0 {
        return Err(invalid("graph sizes must be positive"));
    }
    // The small offset keeps products such as 0.1 * 30 from rounding up.
    let count = |size: usize| ((f * size as f64 - 1e-9).ceil() as usize).clamp(1, size);
    Ok((count(m), count(n)))
}

/// Operators up to this size are decomposed densely.
const DENSE_CROSSOVER: usize = 200;
/// Largest operator a wide request may densify.
const DENSE_WIDE_LIMIT: usize = 4000;

/// Lowest `k` eigenpairs of `op`: dense for small operators or requests
/// covering a tenth of the spectrum, Lanczos otherwise.
pub fn lowest_eigenpairs(op: &SparseSymmetricOperator, k: usize, seed: u64) -> Result<SpectralBasis> {
    let dim = op.dim();
    if dim <= DENSE_CROSSOVER || (dim <= DENSE_WIDE_LIMIT && 10 * k >= dim) {
        dense_symmetric_eig(op.to_dense()?.view())?.truncate(k)
    } else {
        lanczos_smallest(op, k, DEFAULT_TOL, default_max_restarts(k), seed)
    }
}

/// Passband bases of the user and item hypergraphs of `r` for ratio `f`.
pub fn passband_bases(r: &SparseBinaryMatrix, f: f64, seed: u64) -> Result<TruncatedBases> {
    let (phi, psi) = cutoff_counts(f, r.rows(), r.cols())?;
    let (lu, li) = user_item_laplacians(r)?;
    let user = lowest_eigenpairs(&lu, phi, seed)?;
    let item = lowest_eigenpairs(&li, psi, seed.wrapping_add(1))?;
    TruncatedBases::new(user, item, f)
}

/// Truncated user and item bases for one cutoff ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedBases {
    user: SpectralBasis,
    item: SpectralBasis,
    cutoff_ratio: f64,
}

impl TruncatedBases {
    pub fn new(user: SpectralBasis, item: SpectralBasis, cutoff_ratio: f64) -> Result<Self> {
        let (phi, psi) = cutoff_counts(cutoff_ratio, user.dim(), item.dim())?;
        if user.len() != phi || item.len() != psi {
            return Err(invalid(format!(
                "ratio {cutoff_ratio} needs {phi}x{psi} eigenpairs, got {}x{}",
                user.len(),
                item.len()
            )));
        }
        Ok(Self { user, item, cutoff_ratio })
    }

    /// Truncates complete (or longer) bases down to the passband of `f`.
    pub fn from_bases(user: &SpectralBasis, item: &SpectralBasis, f: f64) -> Result<Self> {
        let (phi, psi) = cutoff_counts(f, user.dim(), item.dim())?;
        Self::new(user.truncate(phi)?, item.truncate(psi)?, f)
    }

    pub fn user(&self) -> &SpectralBasis {
        &self.user
    }

    pub fn item(&self) -> &SpectralBasis {
        &self.item
    }

    pub fn cutoff_ratio(&self) -> f64 {
        self.cutoff_ratio
    }

    /// `(Φ, Ψ)`.
    pub fn passband(&self) -> (usize, usize) {
        (self.user.len(), self.item.len())
    }

    /// `(λ_Φ, σ_Ψ)`, the highest retained frequency on each side.
    pub fn cutoff_frequencies(&self) -> (f64, f64) {
        (
            *self.user.frequencies().last().expect("non-empty"),
            *self.item.frequencies().last().expect("non-empty"),
        )
    }
}

/// Frequency-domain kernel over the passband (Φ×Ψ).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralKernel2D {
    values: Array2<f64>,
}

impl SpectralKernel2D {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("kernel entries must be finite"));
        }
        Ok(Self { values })
    }

    pub fn ones(phi: usize, psi: usize) -> Self {
        Self { values: Array2::ones((phi, psi)) }
    }

    /// `k_user k_itemᵀ`.
    pub fn rank_one(k_user: ArrayView1<f64>, k_item: ArrayView1<f64>) -> Result<Self> {
        let outer = k_user.insert_axis(Axis(1)).dot(&k_item.insert_axis(Axis(0)));
        Self::new(outer)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

fn check_rows(what: &str, rows: usize, basis: &SpectralBasis) -> Result<()> {
    if rows != basis.dim() {
        return Err(invalid(format!(
            "{what} has {rows} rows but the basis has dimension {}",
            basis.dim()
        )));
    }
    Ok(())
}

/// `R̃ = Pᵀ R Q`.
pub fn gft_2d(r: ArrayView2<f64>, user: &SpectralBasis, item: &SpectralBasis) -> Result<Array2<f64>> {
    check_rows("signal", r.nrows(), user)?;
    check_rows("signal transpose", r.ncols(), item)?;
    Ok(user.vectors().t().dot(&r).dot(&item.vectors()))
}

/// `P R̃ Qᵀ`.
pub fn igft_2d(
    rt: ArrayView2<f64>,
    user: &SpectralBasis,
    item: &SpectralBasis,
) -> Result<Array2<f64>> {
    if rt.dim() != (user.len(), item.len()) {
        return Err(invalid(format!(
            "spectrum is {:?}, bases give ({}, {})",
            rt.dim(),
            user.len(),
            item.len()
        )));
    }
    Ok(user.vectors().dot(&rt).dot(&item.vectors().t()))
}

/// `P̄ ((P̄ᵀ R Q̄) ⊙ K̄) Q̄ᵀ`.
pub fn lowpass_conv_2d(
    r: ArrayView2<f64>,
    bases: &TruncatedBases,
    kernel: &SpectralKernel2D,
) -> Result<Array2<f64>> {
    if kernel.values.dim() != bases.passband() {
        return Err(invalid(format!(
            "kernel is {:?}, passband is {:?}",
            kernel.values.dim(),
            bases.passband()
        )));
    }
    let spectrum = gft_2d(r, bases.user(), bases.item())? * &kernel.values;
    igft_2d(spectrum.view(), bases.user(), bases.item())
}

/// The low-pass collaborative filter: keeps only the passband of `r`.
pub fn lcf_filter(r: ArrayView2<f64>, bases: &TruncatedBases) -> Result<Array2<f64>> {
    let (phi, psi) = bases.passband();
    lowpass_conv_2d(r, bases, &SpectralKernel2D::ones(phi, psi))
}

/// `P̄ diag(k) P̄ᵀ X`, evaluated right to left so no n×n matrix is formed.
pub fn lowpass_conv_embedding(
    x: ArrayView2<f64>,
    basis: &SpectralBasis,
    k: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    check_rows("embedding", x.nrows(), basis)?;
    if k.len() != basis.len() {
        return Err(invalid(format!("kernel length {} for {} eigenvectors", k.len(), basis.len())));
    }
    let mut coeffs = basis.vectors().t().dot(&x);
    coeffs *= &k.insert_axis(Axis(1));
    Ok(basis.vectors().dot(&coeffs))
}

/// `Vᵀ s` over a complete basis.
pub fn gft_1d(s: ArrayView1<f64>, basis: &SpectralBasis) -> Result<Array1<f64>> {
    if basis.len() != basis.dim() {
        return Err(invalid("one-dimensional transform needs a complete basis"));
    }
    if s.len() != basis.dim() {
        return Err(invalid(format!("signal length {} for dimension {}", s.len(), basis.dim())));
    }
    Ok(basis.vectors().t().dot(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye_basis(n: usize) -> SpectralBasis {
        SpectralBasis::new(Array2::eye(n), (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_counts(1.0, 7, 3).unwrap(), (7, 3));
        assert_eq!(cutoff_counts(0.005, 20247, 11589).unwrap(), (102, 58));
        assert_eq!(cutoff_counts(0.0002, 100, 100).unwrap(), (1, 1));
        assert_eq!(cutoff_counts(0.1, 30, 20).unwrap(), (3, 2));
        assert!(cutoff_counts(0.0, 3, 3).is_err());
        assert!(cutoff_counts(1.5, 3, 3).is_err());
    }

    #[test]
    fn identity_bases_are_transparent() {
        let r = ndarray::array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let (p, q) = (eye_basis(3), eye_basis(2));
        assert_eq!(gft_2d(r.view(), &p, &q).unwrap(), r);
        assert_eq!(igft_2d(r.view(), &p, &q).unwrap(), r);
        assert!(gft_2d(r.t(), &p, &q).is_err());
        assert!(igft_2d(r.t(), &p, &q).is_err());
    }

    #[test]
    fn kernel_shape_checked() {
        let bases = TruncatedBases::new(eye_basis(3), eye_basis(2), 1.0).unwrap();
        let r = Array2::ones((3, 2));
        assert!(lowpass_conv_2d(r.view(), &bases, &SpectralKernel2D::ones(2, 2)).is_err());
        assert!(SpectralKernel2D::new(ndarray::array![[f64::NAN]]).is_err());
    }

    #[test]
    fn truncated_bases_validate_counts() {
        assert!(TruncatedBases::new(eye_basis(3), eye_basis(2), 0.5).is_err());
        let t = TruncatedBases::from_bases(&eye_basis(4), &eye_basis(2), 0.5).unwrap();
        assert_eq!(t.passband(), (2, 1));
        assert_eq!(t.cutoff_frequencies(), (1.0, 0.0));
    }

    #[test]
    fn embedding_conv_edge_cases() {
        let x = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        let b = eye_basis(2);
        assert_eq!(lowpass_conv_embedding(x.view(), &b, Array1::ones(2).view()).unwrap(), x);
        assert_eq!(
            lowpass_conv_embedding(x.view(), &b, Array1::zeros(2).view()).unwrap(),
            Array2::<f64>::zeros((2, 2))
        );
        assert!(lowpass_conv_embedding(x.view(), &b, Array1::zeros(3).view()).is_err());
    }

    #[test]
    fn gft_1d_needs_full_basis() {
        let b = eye_basis(3);
        assert!(gft_1d(Array1::ones(3).view(), &b.truncate(2).unwrap()).is_err());
        assert!(gft_1d(Array1::ones(2).view(), &b).is_err());
        let e1 = gft_1d(b.vectors().column(1), &b).unwrap();
        assert_eq!(e1, ndarray::array![0.0, 1.0, 0.0]);
    }
}
