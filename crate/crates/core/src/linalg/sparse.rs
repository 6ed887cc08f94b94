//! Compressed sparse row storage for 0/1 matrices.

use ndarray::{Array2, ArrayView2};

use crate::error::{invalid, Result};

/// A binary matrix in CSR form. Every stored entry has value 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl SparseBinaryMatrix {
    /// Builds a matrix from coordinate pairs. Duplicates collapse to a single one.
    pub fn from_pairs(rows: usize, cols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for &(r, c) in pairs {
            if r >= rows || c >= cols {
                return Err(invalid(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            per_row[r].push(c);
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(pairs.len());
        indptr.push(0);
        for mut row in per_row {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(&row);
            indptr.push(indices.len());
        }
        Ok(Self { rows, cols, indptr, indices })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices of the ones in row `r`, ascending.
    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.indptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols];
        for &c in &self.indices {
            counts[c] += 1;
        }
        counts
    }

    pub fn transpose(&self) -> Self {
        let mut indptr = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            indptr[c + 1] += 1;
        }
        for i in 0..self.cols {
            indptr[i + 1] += indptr[i];
        }
        let mut next = indptr.clone();
        let mut indices = vec![0usize; self.indices.len()];
        for r in 0..self.rows {
            for &c in self.row(r) {
                indices[next[c]] = r;
                next[c] += 1;
            }
        }
        Self { rows: self.cols, cols: self.rows, indptr, indices }
    }

    /// Iterates `(row, col)` for every stored one in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    /// `y = A x` for a dense vector.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).iter().map(|&c| x[c]).sum();
        }
    }

    /// `Y = A X` for a dense block with `cols` rows.
    pub fn mul_dense(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, x.ncols()));
        for r in 0..self.rows {
            let mut dst = out.row_mut(r);
            for &c in self.row(r) {
                dst += &x.row(c);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (r, c) in self.iter() {
            out[[r, c]] = 1.0;
        }
        out
    }
}
