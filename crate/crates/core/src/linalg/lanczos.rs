//! Thick-restart Lanczos for the algebraically smallest eigenpairs of a
//! symmetric positive semi-definite operator.
//!
//! Every new Krylov vector is orthogonalized twice (classical Gram-Schmidt)
//! against both the converged ("locked") eigenvectors and the whole current
//! basis, and the projected matrix is assembled from those coefficients.
//! Converged Ritz pairs are locked and deflated. Once `k` pairs are locked,
//! a cycle from a fresh random vector in the deflated complement confirms that
//! no smaller eigenvalue was skipped, which is how repeated eigenvalues are
//! recovered.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::basis::SpectralBasis;
use super::operator::SparseSymmetricOperator;
use super::tridiag::symmetric_eig;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Default restart budget for `k` wanted pairs.
pub fn default_max_restarts(k: usize) -> usize {
    50 * k.max(1)
}

struct Locked {
    dim: usize,
    values: Vec<f64>,
    data: Vec<f64>,
}

impl Locked {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.dim), &self.data).expect("locked block shape")
    }

    fn push(&mut self, value: f64, v: &Array1<f64>) {
        self.values.push(value);
        self.data.extend(v.iter());
    }

    /// k-th smallest locked eigenvalue.
    fn kth(&self, k: usize) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v[k - 1]
    }
}

/// Removes the components of `w` along the rows of `block`, twice.
/// Returns the accumulated coefficients.
fn project_out(block: ArrayView2<f64>, w: &mut Array1<f64>) -> Array1<f64> {
    if block.nrows() == 0 {
        return Array1::zeros(0);
    }
    let mut total = Array1::zeros(block.nrows());
    for _ in 0..2 {
        let c = block.dot(w);
        w.scaled_add(-1.0, &block.t().dot(&c));
        total += &c;
    }
    total
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| StandardNormal.sample(rng)))
}

/// Computes the `k` smallest eigenpairs of `op`.
///
/// `max_iters` bounds the number of restart cycles. The result is
/// deterministic for a given `seed`.
pub fn lanczos_smallest(
    op: &SparseSymmetricOperator,
    k: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<SpectralBasis> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(invalid(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid("tolerance must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locked = Locked { dim: n, values: Vec::with_capacity(k), data: Vec::with_capacity(k * n) };
    let target = (2 * k + 20).max(50);

    // Ritz vectors carried into the next cycle, with their Ritz values.
    let mut kept: Vec<(f64, Array1<f64>)> = Vec::new();
    // Krylov continuation direction; `None` starts from a random vector.
    let mut continuation: Option<Array1<f64>> = None;
    let mut last_residuals: Vec<f64> = Vec::new();
    let mut y = vec![0.0; n];

    for _restart in 0..max_iters.max(1) {
        let free = n - locked.len();
        if free == 0 {
            break;
        }
        let verifying = locked.len() >= k && kept.is_empty() && continuation.is_none();
        let m = target.min(free).max(kept.len() + 1);

        let mut basis = Array2::<f64>::zeros((m, n));
        let mut h = Array2::<f64>::zeros((m, m));
        let mut len = 0;
        let mut scale: f64 = 1e-300;

        for (theta, v) in kept.drain(..) {
            let mut v = v;
            project_out(locked.view(), &mut v);
            project_out(basis.slice(s![..len, ..]), &mut v);
            let norm = v.dot(&v).sqrt();
            if norm < 1e-8 {
                continue;
            }
            basis.row_mut(len).assign(&(v / norm));
            h[[len, len]] = theta;
            scale = scale.max(theta.abs());
            len += 1;
        }

        let mut start = continuation.take().unwrap_or_else(|| random_vector(n, &mut rng));
        let mut residual_dir: Option<Array1<f64>> = None;
        'expand: loop {
            // Orthonormalize the candidate; fall back to random directions on breakdown.
            let mut attempts = 0;
            loop {
                project_out(locked.view(), &mut start);
                project_out(basis.slice(s![..len, ..]), &mut start);
                let norm = start.dot(&start).sqrt();
                let floor = if attempts == 0 { 1e-10 * scale.max(1.0) } else { 1e-8 };
                if norm > floor {
                    start /= norm;
                    break;
                }
                attempts += 1;
                if attempts > 3 {
                    break 'expand;
                }
                start = random_vector(n, &mut rng);
                let norm = start.dot(&start).sqrt();
                start /= norm;
            }
            basis.row_mut(len).assign(&start);
            let j = len;
            len += 1;

            let x = basis.row(j).to_vec();
            op.apply_into(&x, &mut y);
            let mut w = Array1::from(y.clone());
            project_out(locked.view(), &mut w);
            let coeffs = project_out(basis.slice(s![..len, ..]), &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                h[[i, j]] = *c;
                scale = scale.max(c.abs());
            }
            if len == m {
                residual_dir = Some(w);
                break;
            }
            start = w;
        }

        for j in 0..len {
            for i in 0..j {
                h[[j, i]] = h[[i, j]];
            }
        }
        let (theta, s_vecs) = symmetric_eig(&h.slice(s![..len, ..len]).to_owned())?;
        let q = basis.slice(s![..len, ..]);

        let ritz = |idx: usize| -> Array1<f64> { q.t().dot(&s_vecs.column(idx)) };
        let residual_of = |v: &Array1<f64>, value: f64, y: &mut Vec<f64>| -> f64 {
            op.apply_into(v.as_slice().expect("contiguous"), y);
            y.iter().zip(v.iter()).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt()
        };

        let threshold = (locked.len() >= k).then(|| locked.kth(k) - tol);
        let locked_before = locked.len();

        // Lock the converged prefix; everything after the first unconverged
        // wanted pair stays pending.
        last_residuals.clear();
        let mut pending: Vec<(f64, Array1<f64>)> = Vec::new();
        let mut idx = 0;
        while idx < len {
            let value = theta[idx];
            let wanted = match threshold {
                Some(t) => value < t,
                None => locked.len() + pending.len() < k,
            };
            if !wanted {
                break;
            }
            let v = ritz(idx);
            let r = residual_of(&v, value, &mut y);
            if r < tol && pending.is_empty() {
                locked.push(value, &v);
            } else {
                last_residuals.push(r);
                pending.push((value, v));
            }
            idx += 1;
        }

        if pending.is_empty() && locked.len() >= k {
            if verifying && locked.len() == locked_before {
                return finish(locked, k);
            }
            // Confirm from a fresh random start in the deflated complement.
            kept.clear();
            continuation = None;
            continue;
        }

        // Thick restart with a few extra Ritz vectors beyond the wanted ones.
        let buffer = (pending.len() / 2).max(5);
        let limit = (idx + buffer).min(len).min(idx + m / 2);
        kept = pending;
        if threshold.is_none() {
            kept.extend((idx..limit).map(|i| (theta[i], ritz(i))));
        }
        if kept.len() >= m {
            kept.truncate(m - 1);
        }
        continuation = residual_dir;
    }

    if locked.len() >= k && locked.len() == n {
        return finish(locked, k);
    }
    let mut residuals = vec![0.0; locked.len().min(k)];
    residuals.extend(last_residuals);
    Err(Error::ConvergenceFailure { restarts: max_iters, residuals })
}

fn finish(locked: Locked, k: usize) -> Result<SpectralBasis> {
    let n = locked.dim;
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| locked.values[a].total_cmp(&locked.values[b]));
    order.truncate(k);
    let view = locked.view();
    let mut vectors = Array2::zeros((n, k));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&view.row(src));
    }
    let values = order.iter().map(|&i| locked.values[i]).collect();
    SpectralBasis::new(vectors, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_spectrum() {
        let op = SparseSymmetricOperator::identity(5);
        let b = lanczos_smallest(&op, 3, DEFAULT_TOL, default_max_restarts(3), 1).unwrap();
        for f in b.frequencies() {
            assert!((f - 1.0).abs() < 1e-12);
        }
        assert!(b.orthonormality_error() < 1e-10);
    }

    #[test]
    fn two_by_two_laplacian() {
        let r = 0.5f64.sqrt() / 2.0;
        let op = SparseSymmetricOperator::from_dense(array![[0.25, -r], [-r, 0.5]]).unwrap();
        let b = lanczos_smallest(&op, 2, DEFAULT_TOL, 100, 7).unwrap();
        assert!(b.frequencies()[0].abs() < 1e-8);
        assert!((b.frequencies()[1] - 0.75).abs() < 1e-8);
    }

    #[test]
    fn four_cycle() {
        // I - A/2 for the 4-cycle.
        let a = array![
            [1.0, -0.5, 0.0, -0.5],
            [-0.5, 1.0, -0.5, 0.0],
            [0.0, -0.5, 1.0, -0.5],
            [-0.5, 0.0, -0.5, 1.0]
        ];
        let op = SparseSymmetricOperator::from_dense(a).unwrap();
        let b = lanczos_smallest(&op, 4, DEFAULT_TOL, 200, 2).unwrap();
        for (f, e) in b.frequencies().iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert!((f - e).abs() < 1e-8, "{f} vs {e}");
        }
        b.validate(Some(&op), 1e-8).unwrap();
    }

    #[test]
    fn degenerate_block_found_in_larger_problem() {
        // diag with a repeated smallest eigenvalue.
        let mut d = Array2::zeros((40, 40));
        for i in 0..40 {
            d[[i, i]] = if i < 3 { 0.5 } else { 1.0 + i as f64 * 0.01 };
        }
        let op = SparseSymmetricOperator::from_dense(d).unwrap();
        let b = lanczos_smallest(&op, 4, DEFAULT_TOL, 200, 9).unwrap();
        for f in &b.frequencies()[..3] {
            assert!((f - 0.5).abs() < 1e-12);
        }
        assert!((b.frequencies()[3] - 1.03).abs() < 1e-10);
    }

    #[test]
    fn bad_arguments() {
        let op = SparseSymmetricOperator::identity(3);
        assert!(lanczos_smallest(&op, 0, DEFAULT_TOL, 10, 0).is_err());
        assert!(lanczos_smallest(&op, 4, DEFAULT_TOL, 10, 0).is_err());
        assert!(lanczos_smallest(&op, 1, 0.0, 10, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let mut d = Array2::zeros((30, 30));
        for i in 0..30 {
            d[[i, i]] = 2.0;
            if i + 1 < 30 {
                d[[i, i + 1]] = -1.0;
                d[[i + 1, i]] = -1.0;
            }
        }
        let op = SparseSymmetricOperator::from_dense(d).unwrap();
        let a = lanczos_smallest(&op, 5, DEFAULT_TOL, 100, 11).unwrap();
        let b = lanczos_smallest(&op, 5, DEFAULT_TOL, 100, 11).unwrap();
        assert_eq!(a, b);
    }
}
