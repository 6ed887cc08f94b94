use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

use super::basis::SpectralBasis;
use crate::error::{invalid, Result};

/// Largest matrix accepted by [`dense_symmetric_eig`].
pub const DENSE_EIG_LIMIT: usize = 2000;

pub(crate) fn check_symmetric(a: ArrayView2<f64>, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(invalid(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if (a[[i, j]] - a[[j, i]]).abs() > tol {
                return Err(invalid(format!(
                    "matrix not symmetric at ({i}, {j}): {} vs {}",
                    a[[i, j]],
                    a[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a small dense symmetric matrix.
pub fn dense_symmetric_eig(a: ArrayView2<f64>) -> Result<SpectralBasis> {
    check_symmetric(a, 1e-10)?;
    let n = a.nrows();
    if n > DENSE_EIG_LIMIT {
        return Err(invalid(format!("dense eigensolve limited to n <= {DENSE_EIG_LIMIT}")));
    }
    if n == 0 {
        return Err(invalid("empty matrix"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = SymmetricEigen::new(m);
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
    SpectralBasis::new(vectors, eig.eigenvalues.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_matrix() {
        let b = dense_symmetric_eig(array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]].view())
            .unwrap();
        assert_eq!(b.frequencies(), &[1.0, 2.0, 3.0]);
        let expected = array![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(b.vectors(), expected.view());
    }

    #[test]
    fn zero_matrix() {
        let b = dense_symmetric_eig(Array2::zeros((3, 3)).view()).unwrap();
        assert_eq!(b.frequencies(), &[0.0, 0.0, 0.0]);
        assert!(b.orthonormality_error() < 1e-12);
    }

    #[test]
    fn asymmetric_rejected() {
        assert!(dense_symmetric_eig(array![[1.0, 1.0], [0.0, 1.0]].view()).is_err());
        assert!(dense_symmetric_eig(Array2::zeros((2, 3)).view()).is_err());
    }
}
