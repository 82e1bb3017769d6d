//! C-SVC with an RBF kernel, solved by sequential minimal optimisation with
//! maximal-violating-pair working-set selection.

use std::collections::VecDeque;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::forest::{check_finite, check_labels};
use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_SUBPROBLEMS: usize = 1_000_000;
const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    /// Unused by the deterministic solver; kept so every learner takes a seed.
    pub seed: u64,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        SvmParams {
            c,
            gamma,
            tol: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SvmModel<F> {
    /// Standardized training vectors with nonzero multipliers.
    pub support_vectors: Vec<Vec<F>>,
    /// `αᵢ yᵢ` for each support vector.
    pub dual_coefficients: Vec<F>,
    pub bias: F,
    pub gamma: F,
    pub c: F,
    pub feature_mean: Vec<F>,
    pub feature_scale: Vec<F>,
    pub iterations: usize,
}

/// Full dual solution, including zero multipliers, for KKT checks.
#[derive(Debug, Clone)]
pub struct SvmSolution<F> {
    pub model: SvmModel<F>,
    pub alpha: Vec<F>,
    /// Box bound of each training point.
    pub upper: Vec<F>,
}

fn rbf<F: Scalar>(a: &[F], b: &[F], gamma: F) -> F {
    let d2 = a.iter().zip(b).fold(F::zero(), |s, (&u, &v)| s + (u - v) * (u - v));
    (-gamma * d2).exp()
}

struct KernelCache<'a, F> {
    x: &'a [Vec<F>],
    gamma: F,
    rows: Vec<Option<Box<[F]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a, F: Scalar> KernelCache<'a, F> {
    fn new(x: &'a [Vec<F>], gamma: F) -> Self {
        let n = x.len().max(1);
        let capacity = (CACHE_BYTES / (n * std::mem::size_of::<F>())).max(2);
        KernelCache {
            x,
            gamma,
            rows: vec![None; x.len()],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn ensure(&mut self, i: usize) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = &self.x[i];
        let row: Box<[F]> = self.x.iter().map(|xk| rbf(xi, xk, self.gamma)).collect();
        self.rows[i] = Some(row);
        self.order.push_back(i);
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[F], &[F]) {
        self.ensure(i);
        self.ensure(j);
        (self.rows[i].as_deref().unwrap(), self.rows[j].as_deref().unwrap())
    }
}

/// Fits with every observation's box bound equal to `c`.
pub fn fit_svm<F: Scalar>(x: ArrayView2<F>, y: &[Label], params: &SvmParams) -> Result<SvmModel<F>> {
    let upper = vec![F::lit(params.c); x.nrows()];
    solve_svm(x, y, &upper, params).map(|s| s.model)
}

/// Solves the dual with per-observation box bounds.
pub fn solve_svm<F: Scalar>(x: ArrayView2<F>, y: &[Label], upper: &[F], params: &SvmParams) -> Result<SvmSolution<F>> {
    let (n, p) = x.dim();
    check_labels(n, y)?;
    check_finite(x)?;
    if !(params.c > 0.0 && params.gamma > 0.0 && params.tol > 0.0) {
        return Err(Error::InvalidInput("svm c, gamma and tol must be positive".into()));
    }
    if upper.len() != n || upper.iter().any(|u| !(*u > F::zero())) {
        return Err(Error::InvalidInput("svm box bounds must be positive, one per row".into()));
    }

    let nf = F::lit(n as f64);
    let mut mean = vec![F::zero(); p];
    let mut scale = vec![F::one(); p];
    for j in 0..p {
        let col = x.column(j);
        let m = col.sum() / nf;
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<F>() / nf;
        mean[j] = m;
        if var > F::zero() {
            scale[j] = var.sqrt();
        }
    }
    let z: Vec<Vec<F>> = x
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, &v)| (v - mean[j]) / scale[j]).collect())
        .collect();

    let gamma = F::lit(params.gamma);
    let tol = F::tolerance(params.tol);
    let yv: Vec<F> = y.iter().map(|l| if l.is_pd() { F::one() } else { -F::one() }).collect();
    let mut alpha = vec![F::zero(); n];
    let mut grad = vec![-F::one(); n];
    let mut cache = KernelCache::new(&z, gamma);
    let mut iterations = 0usize;

    let is_up = |a: F, yy: F, c: F| (yy > F::zero() && a < c) || (yy < F::zero() && a > F::zero());
    let is_low = |a: F, yy: F, c: F| (yy > F::zero() && a > F::zero()) || (yy < F::zero() && a < c);

    loop {
        let (mut gmax, mut gmin) = (F::neg_infinity(), F::infinity());
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -yv[t] * grad[t];
            if is_up(alpha[t], yv[t], upper[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if is_low(alpha[t], yv[t], upper[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            // Confirm against a freshly accumulated gradient before stopping.
            let fresh = exact_gradient(&mut cache, &alpha, &yv);
            let drift = fresh
                .iter()
                .zip(&grad)
                .fold(F::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            grad = fresh;
            if drift <= tol * F::lit(1e-3) {
                break;
            }
            continue;
        }
        if iterations >= MAX_SUBPROBLEMS {
            return Err(Error::NonConvergence(format!(
                "SMO exceeded {MAX_SUBPROBLEMS} subproblems"
            )));
        }
        iterations += 1;

        let (ki, kj) = cache.pair(i, j);
        let (ci, cj) = (upper[i], upper[j]);
        let kij = ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if yv[i] != yv[j] {
            let quad = (ki[i] + kj[j] - F::lit(2.0) * kij).max(F::lit(TAU));
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > F::zero() {
                if aj < F::zero() {
                    aj = F::zero();
                    ai = diff;
                }
            } else if ai < F::zero() {
                ai = F::zero();
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let quad = (ki[i] + kj[j] - F::lit(2.0) * kij).max(F::lit(TAU));
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < F::zero() {
                aj = F::zero();
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < F::zero() {
                ai = F::zero();
                aj = sum;
            }
        }
        ai = ai.max(F::zero()).min(ci);
        aj = aj.max(F::zero()).min(cj);
        alpha[i] = ai;
        alpha[j] = aj;
        let di = (ai - old_i) * yv[i];
        let dj = (aj - old_j) * yv[j];
        for k in 0..n {
            grad[k] += yv[k] * (ki[k] * di + kj[k] * dj);
        }
    }

    // Bias from the free multipliers, else the midpoint of the feasible range.
    let (mut ub, mut lb) = (F::infinity(), F::neg_infinity());
    let (mut sum_free, mut n_free) = (F::zero(), 0usize);
    for t in 0..n {
        let yg = yv[t] * grad[t];
        if alpha[t] >= upper[t] {
            if yv[t] < F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= F::zero() {
            if yv[t] > F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / F::lit(n_free as f64)
    } else {
        (ub + lb) / F::lit(2.0)
    };

    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for t in 0..n {
        if alpha[t] > F::zero() {
            support_vectors.push(z[t].clone());
            dual_coefficients.push(alpha[t] * yv[t]);
        }
    }
    Ok(SvmSolution {
        model: SvmModel {
            support_vectors,
            dual_coefficients,
            bias: -rho,
            gamma,
            c: F::lit(params.c),
            feature_mean: mean,
            feature_scale: scale,
            iterations,
        },
        alpha,
        upper: upper.to_vec(),
    })
}

fn exact_gradient<F: Scalar>(cache: &mut KernelCache<'_, F>, alpha: &[F], yv: &[F]) -> Vec<F> {
    let n = alpha.len();
    let mut g = vec![-F::one(); n];
    for s in 0..n {
        if alpha[s] > F::zero() {
            cache.ensure(s);
            let ks = cache.rows[s].as_deref().unwrap();
            let coef = alpha[s] * yv[s];
            for k in 0..n {
                g[k] += yv[k] * coef * ks[k];
            }
        }
    }
    g
}

impl<F: Scalar> SvmModel<F> {
    pub fn n_features(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn standardize(&self, x: &[F]) -> Vec<F> {
        x.iter()
            .zip(self.feature_mean.iter().zip(&self.feature_scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    /// Signed decision value; positive means PD.
    pub fn decision(&self, x: &[F]) -> Result<F> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let z = self.standardize(x);
        Ok(self.decision_standardized(&z))
    }

    pub fn decision_standardized(&self, z: &[F]) -> F {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .fold(self.bias, |acc, (sv, &c)| acc + c * rbf(sv, z, self.gamma))
    }
}

impl<F: Scalar> SvmSolution<F> {
    /// Largest KKT violation over the training points, measured on
    /// `yᵢ f(xᵢ)` recomputed from the stored model.
    pub fn max_kkt_violation(&self, x: ArrayView2<F>, y: &[Label]) -> F {
        let mut worst = F::zero();
        for (t, row) in x.rows().into_iter().enumerate() {
            let yy = if y[t].is_pd() { F::one() } else { -F::one() };
            let m = yy * self.model.decision(&row.to_vec()).expect("training dimension");
            let v = if self.alpha[t] <= F::zero() {
                F::one() - m
            } else if self.alpha[t] >= self.upper[t] {
                m - F::one()
            } else {
                (m - F::one()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn signed_sum(&self, y: &[Label]) -> F {
        self.alpha
            .iter()
            .zip(y)
            .fold(F::zero(), |s, (&a, l)| if l.is_pd() { s + a } else { s - a })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn xor_all_support_vectors() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [Label::Normal, Label::Normal, Label::EarlyPd, Label::EarlyPd];
        let s = solve_svm(x.view(), &y, &[10.0; 4], &SvmParams::new(10.0, 1.0)).unwrap();
        assert_eq!(s.model.support_vectors.len(), 4);
        for (i, row) in x.rows().into_iter().enumerate() {
            let d = s.model.decision(&row.to_vec()).unwrap();
            assert_eq!(d > 0.0, y[i].is_pd());
        }
        assert!(s.max_kkt_violation(x.view(), &y) <= 1e-3);
    }

    #[test]
    fn random_problems_satisfy_kkt() {
        let mut rng = crate::seed::rng(17);
        for _ in 0..20 {
            let n = rng.random_range(10..60);
            let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
            let mut y: Vec<Label> = (0..n).map(|i| Label::from_pd(x[[i, 0]] + 0.3 * rng.random::<f64>() > 0.6)).collect();
            y[0] = Label::Normal;
            y[1] = Label::EarlyPd;
            let params = SvmParams::new(rng.random_range(0.1..10.0), rng.random_range(0.05..2.0));
            let s = solve_svm(x.view(), &y, &vec![params.c; n], &params).unwrap();
            assert!(s.alpha.iter().all(|&a| (0.0..=params.c).contains(&a)));
            assert!(s.signed_sum(&y).abs() < 1e-8);
            assert!(s.max_kkt_violation(x.view(), &y) <= params.tol);
        }
    }

    #[test]
    fn duplication_invariance() {
        let mut rng = crate::seed::rng(2);
        let n = 40;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let y: Vec<Label> = (0..n).map(|i| Label::from_pd(x[[i, 0]] > x[[i, 1]])).collect();
        let params = SvmParams { tol: 1e-6, ..SvmParams::new(4.0, 0.5) };
        let a = fit_svm(x.view(), &y, &params).unwrap();
        let x2 = ndarray::concatenate(ndarray::Axis(0), &[x.view(), x.view()]).unwrap();
        let y2: Vec<Label> = y.iter().chain(&y).copied().collect();
        let b = solve_svm(x2.view(), &y2, &vec![2.0; 2 * n], &params).unwrap().model;
        for row in x.rows() {
            let r = row.to_vec();
            assert!((a.decision(&r).unwrap() - b.decision(&r).unwrap()).abs() <= 1e-3);
        }
    }

    #[test]
    fn separable_sign_match() {
        let x = Array2::from_shape_fn((30, 1), |(i, _)| if i < 15 { i as f64 } else { i as f64 + 20.0 });
        let y: Vec<Label> = (0..30).map(|i| Label::from_pd(i >= 15)).collect();
        let m = fit_svm(x.view(), &y, &SvmParams::new(10.0, 0.01)).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(m.decision(&row.to_vec()).unwrap() > 0.0, y[i].is_pd());
        }
    }
}
