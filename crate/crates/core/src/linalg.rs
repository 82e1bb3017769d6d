//! Small dense routines: Cholesky factorisation and the cyclic Jacobi
//! eigensolver. Matrices here are at most a few dozen rows (feature
//! covariance, IRLS normal equations, GP kernels).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<F> {
    l: Array2<F>,
}

impl<F: Scalar> Cholesky<F> {
    /// Fails when a pivot drops below `rel_tol` times the largest diagonal entry.
    pub fn new(a: ArrayView2<F>, rel_tol: F) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(F::zero(), F::max);
        let floor = rel_tol * max_diag.max(F::min_positive_value());
        let mut l = Array2::<F>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !(d > floor) {
                return None;
            }
            let djj = d.sqrt();
            l[[j, j]] = djj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / djj;
            }
        }
        Some(Cholesky { l })
    }

    pub fn factor(&self) -> &Array2<F> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: ArrayView1<F>) -> Array1<F> {
        let n = self.l.nrows();
        let mut y = Array1::<F>::zeros(n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[[i, k]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: ArrayView1<F>) -> Array1<F> {
        let y = self.solve_lower(b);
        let n = self.l.nrows();
        let mut x = Array1::<F>::zeros(n);
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    /// `A^{-1}`, column by column.
    pub fn inverse(&self) -> Array2<F> {
        let n = self.l.nrows();
        let mut inv = Array2::<F>::zeros((n, n));
        let mut e = Array1::<F>::zeros(n);
        for j in 0..n {
            e.fill(F::zero());
            e[j] = F::one();
            inv.column_mut(j).assign(&self.solve(e.view()));
        }
        inv
    }

    pub fn log_det(&self) -> F {
        let two = F::one() + F::one();
        two * self.l.diag().iter().map(|d| d.ln()).sum::<F>()
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// the *rows* of the second matrix.
pub fn symmetric_eigen<F: Scalar>(a: ArrayView2<F>) -> (Array1<F>, Array2<F>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<F>::eye(n);
    let two = F::lit(2.0);
    let scale = m.iter().map(|x| x.abs()).fold(F::zero(), F::max);
    let eps = F::epsilon();

    for _sweep in 0..100 {
        let mut off = F::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= eps * eps.sqrt() * scale.max(F::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == F::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<F>::zeros((n, n));
    for (row, &i) in order.iter().enumerate() {
        vectors.row_mut(row).assign(&v.column(i));
    }
    (values, vectors)
}

/// Sample covariance (denominator `n - 1`) and column means.
pub fn covariance<F: Scalar>(x: ArrayView2<F>) -> (Array1<F>, Array2<F>) {
    let n = x.nrows();
    let p = x.ncols();
    let nf = F::from_usize(n).unwrap();
    let mean = Array1::from_iter((0..p).map(|j| x.column(j).sum() / nf));
    let centered = &x - &mean.view().insert_axis(ndarray::Axis(0));
    let denom = F::from_usize(n.saturating_sub(1).max(1)).unwrap();
    let cov = centered.t().dot(&centered) / denom;
    (mean, cov)
}
