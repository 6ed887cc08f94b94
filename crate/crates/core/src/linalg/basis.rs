use std::cmp::Ordering;

use ndarray::{s, Array2, ArrayView2};

use super::operator::SparseSymmetricOperator;
use crate::error::{invalid, Result};

/// Eigenvalues closer than this are treated as a tie when ordering.
const TIE_TOLERANCE: f64 = 1e-10;
/// Eigenvalues in `[-NEGATIVE_CLAMP, 0)` are rounding noise and become 0.
const NEGATIVE_CLAMP: f64 = 1e-10;

/// Column-orthonormal eigenvectors with ascending eigenvalues ("frequencies").
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    vectors: Array2<f64>,
    frequencies: Vec<f64>,
}

impl SpectralBasis {
    /// Builds a basis, fixing signs, clamping tiny negative eigenvalues and
    /// ordering columns deterministically.
    pub fn new(vectors: Array2<f64>, frequencies: Vec<f64>) -> Result<Self> {
        if vectors.ncols() != frequencies.len() {
            return Err(invalid(format!(
                "{} eigenvectors but {} eigenvalues",
                vectors.ncols(),
                frequencies.len()
            )));
        }
        if frequencies.iter().any(|f| !f.is_finite()) || vectors.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite eigenpair"));
        }
        Ok(canonicalize(vectors, frequencies))
    }

    /// Wraps already-canonical data without reordering (cache loading).
    pub(crate) fn from_raw(vectors: Array2<f64>, frequencies: Vec<f64>) -> Self {
        Self { vectors, frequencies }
    }

    /// n×k matrix whose columns are eigenvectors.
    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Node count n.
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of retained eigenpairs k.
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Keeps the `k` lowest frequencies.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(invalid(format!("cannot truncate {} eigenpairs to {k}", self.len())));
        }
        Ok(Self {
            vectors: self.vectors.slice(s![.., ..k]).to_owned(),
            frequencies: self.frequencies[..k].to_vec(),
        })
    }

    /// `max |VᵀV − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.t().dot(&self.vectors);
        gram.indexed_iter()
            .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// `‖L v_i − λ_i v_i‖₂` for every retained pair.
    pub fn residuals(&self, op: &SparseSymmetricOperator) -> Result<Vec<f64>> {
        let applied = op.apply_block(self.vectors.view())?;
        Ok((0..self.len())
            .map(|j| {
                let lambda = self.frequencies[j];
                applied
                    .column(j)
                    .iter()
                    .zip(self.vectors.column(j))
                    .map(|(a, v)| (a - lambda * v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }

    /// Checks orthonormality, ordering, non-negativity and, when an operator
    /// is given, per-pair residuals against `tol`.
    pub fn validate(&self, op: Option<&SparseSymmetricOperator>, tol: f64) -> Result<()> {
        let ortho = self.orthonormality_error();
        if ortho >= 1e-8 {
            return Err(invalid(format!("basis not orthonormal: max |VᵀV − I| = {ortho:e}")));
        }
        if self.frequencies.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("frequencies not ascending"));
        }
        if self.frequencies.iter().any(|&f| f < -NEGATIVE_CLAMP) {
            return Err(invalid("negative frequency"));
        }
        if let Some(op) = op {
            if op.dim() != self.dim() {
                return Err(invalid("operator and basis dimensions differ"));
            }
            let worst = self.residuals(op)?.into_iter().fold(0.0, f64::max);
            if worst >= tol {
                return Err(invalid(format!("eigenpair residual {worst:e} exceeds {tol:e}")));
            }
        }
        Ok(())
    }
}

fn leading_value(v: ndarray::ArrayView1<f64>) -> f64 {
    v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0)
}

fn canonicalize(mut vectors: Array2<f64>, mut frequencies: Vec<f64>) -> SpectralBasis {
    for f in frequencies.iter_mut() {
        if *f < 0.0 && *f >= -NEGATIVE_CLAMP {
            *f = 0.0;
        }
    }
    for mut col in vectors.columns_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }

    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| frequencies[a].partial_cmp(&frequencies[b]).unwrap_or(Ordering::Equal));
    // Re-sort runs of tied eigenvalues by their leading component.
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && frequencies[order[end]] - frequencies[order[end - 1]] <= TIE_TOLERANCE
        {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&a, &b| {
                leading_value(vectors.column(a))
                    .partial_cmp(&leading_value(vectors.column(b)))
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
        }
        start = end;
    }

    let mut sorted = Array2::zeros(vectors.raw_dim());
    for (dst, &src) in order.iter().enumerate() {
        sorted.column_mut(dst).assign(&vectors.column(src));
    }
    let freqs = order.iter().map(|&i| frequencies[i]).collect();
    SpectralBasis { vectors: sorted, frequencies: freqs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sign_and_order_normalized() {
        let v = array![[0.0, -1.0], [-1.0, 0.0]];
        let b = SpectralBasis::new(v, vec![2.0, -1e-12]).unwrap();
        assert_eq!(b.frequencies(), &[0.0, 2.0]);
        assert_eq!(b.vectors(), array![[1.0, 0.0], [0.0, 1.0]].view());
    }

    #[test]
    fn ties_broken_by_leading_component() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = array![[r, 0.1], [r, 0.99498743710662]];
        let b = SpectralBasis::new(v, vec![1.0, 1.0]).unwrap();
        assert!((b.vectors()[[0, 0]] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn truncate_bounds() {
        let b = SpectralBasis::new(Array2::eye(3), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(b.truncate(2).unwrap().len(), 2);
        assert!(b.truncate(0).is_err());
        assert!(b.truncate(4).is_err());
    }
}
