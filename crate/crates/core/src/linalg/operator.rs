use ndarray::{Array2, ArrayView2};

use super::sparse::SparseBinaryMatrix;
use crate::error::{invalid, Result};

/// Largest dimension for which [`SparseSymmetricOperator::to_dense`] will materialize.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Debug)]
enum Plan {
    Identity,
    Zero,
    Dense(Array2<f64>),
    /// `x - D^{-1/2} H (W Δ^{-1}) Hᵀ D^{-1/2} x`
    Hypergraph {
        incidence: SparseBinaryMatrix,
        incidence_t: SparseBinaryMatrix,
        inv_sqrt_degree: Vec<f64>,
        edge_scale: Vec<f64>,
    },
}

/// A symmetric linear operator evaluated through a composition of factors.
#[derive(Clone, Debug)]
pub struct SparseSymmetricOperator {
    dim: usize,
    plan: Plan,
}

impl SparseSymmetricOperator {
    pub fn identity(dim: usize) -> Self {
        Self { dim, plan: Plan::Identity }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, plan: Plan::Zero }
    }

    /// Wraps an explicit symmetric matrix. Intended for small problems and tests.
    pub fn from_dense(a: Array2<f64>) -> Result<Self> {
        super::check_symmetric(a.view(), 1e-10)?;
        Ok(Self { dim: a.nrows(), plan: Plan::Dense(a) })
    }

    /// Normalized hypergraph Laplacian for a node×edge incidence matrix.
    ///
    /// Callers guarantee every node and edge has positive degree.
    pub(crate) fn normalized_hypergraph(
        incidence: SparseBinaryMatrix,
        edge_weights: &[f64],
    ) -> Self {
        let incidence_t = incidence.transpose();
        let inv_sqrt_degree = (0..incidence.rows())
            .map(|r| {
                let d: f64 = incidence.row(r).iter().map(|&e| edge_weights[e]).sum();
                1.0 / d.sqrt()
            })
            .collect();
        let edge_scale = (0..incidence_t.rows())
            .map(|e| edge_weights[e] / incidence_t.row(e).len() as f64)
            .collect();
        Self {
            dim: incidence.rows(),
            plan: Plan::Hypergraph { incidence, incidence_t, inv_sqrt_degree, edge_scale },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored nonzeros across all factors; one application costs O(nnz_estimate).
    pub fn nnz_estimate(&self) -> usize {
        match &self.plan {
            Plan::Identity => self.dim,
            Plan::Zero => 0,
            Plan::Dense(a) => a.len(),
            Plan::Hypergraph { incidence, .. } => 2 * incidence.nnz() + 3 * self.dim,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "operator of dimension {} applied to vector of length {}",
                self.dim,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.plan {
            Plan::Identity => y.copy_from_slice(x),
            Plan::Zero => y.fill(0.0),
            Plan::Dense(a) => {
                for (out, row) in y.iter_mut().zip(a.rows()) {
                    *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Plan::Hypergraph { incidence, incidence_t, inv_sqrt_degree, edge_scale } => {
                let scaled: Vec<f64> =
                    x.iter().zip(inv_sqrt_degree).map(|(v, s)| v * s).collect();
                let mut edge = vec![0.0; incidence_t.rows()];
                incidence_t.mul_vec(&scaled, &mut edge);
                for (e, s) in edge.iter_mut().zip(edge_scale) {
                    *e *= s;
                }
                incidence.mul_vec(&edge, y);
                for ((out, &xi), s) in y.iter_mut().zip(x).zip(inv_sqrt_degree) {
                    *out = xi - s * *out;
                }
            }
        }
    }

    /// Applies the operator to each column of `x`.
    pub fn apply_block(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.dim {
            return Err(invalid(format!(
                "operator of dimension {} applied to block with {} rows",
                self.dim,
                x.nrows()
            )));
        }
        let mut out = Array2::zeros(x.raw_dim());
        let mut col = vec![0.0; self.dim];
        let mut y = vec![0.0; self.dim];
        for (j, src) in x.columns().into_iter().enumerate() {
            col.iter_mut().zip(src.iter()).for_each(|(d, s)| *d = *s);
            self.apply_into(&col, &mut y);
            out.column_mut(j).iter_mut().zip(&y).for_each(|(d, s)| *d = *s);
        }
        Ok(out)
    }

    /// Materializes the operator. Refuses dimensions above [`DENSE_LIMIT`].
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        if self.dim > DENSE_LIMIT {
            return Err(invalid(format!(
                "refusing to densify operator of dimension {} (limit {DENSE_LIMIT})",
                self.dim
            )));
        }
        self.apply_block(Array2::eye(self.dim).view())
    }
}
