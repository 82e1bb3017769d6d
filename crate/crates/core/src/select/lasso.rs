//! L1-penalised logistic regression by cyclic coordinate descent, with the
//! penalty chosen by cross-validated deviance.

use log::warn;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::FeatureMask;
use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::eval::folds::stratified_assignment;
use crate::scalar::{sigmoid, softplus, Scalar};

pub const MAX_SWEEPS: usize = 1000;
pub const COEF_TOL: f64 = 1e-7;
pub const GRID_POINTS: usize = 100;
pub const GRID_RATIO: f64 = 1e-4;
const INNER_NEWTON: usize = 20;

/// Column centring and unit-variance scaling (population variance).
/// Constant columns are left out of the standardized design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Standardizer<F> {
    pub mean: Vec<F>,
    pub scale: Vec<F>,
    pub active: Vec<usize>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn fit(x: ArrayView2<F>) -> Self {
        let (n, p) = x.dim();
        let nf = F::lit(n as f64);
        let mut mean = vec![F::zero(); p];
        let mut scale = vec![F::one(); p];
        let mut active = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / nf;
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<F>() / nf;
            mean[j] = m;
            if var > F::zero() {
                scale[j] = var.sqrt();
                active.push(j);
            }
        }
        if active.len() < p {
            let dropped: Vec<usize> = (0..p).filter(|j| !active.contains(j)).collect();
            warn!("lasso: zero-variance columns {dropped:?} left out of standardization");
        }
        Standardizer { mean, scale, active }
    }

    /// Standardized active columns, column-major.
    pub fn columns(&self, x: ArrayView2<F>) -> Vec<Vec<F>> {
        self.active
            .iter()
            .map(|&j| x.column(j).iter().map(|&v| (v - self.mean[j]) / self.scale[j]).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LassoFit<F> {
    pub lambda: f64,
    /// Unpenalised intercept on the standardized scale.
    pub intercept: F,
    /// Coefficients on the standardized scale, one per input column
    /// (zero for constant columns).
    pub coefficients: Vec<F>,
    pub sweeps: usize,
    /// Objective `-(1/n)·LL + λ‖β‖₁` after every sweep.
    pub objective_trace: Vec<F>,
}

impl<F: Scalar> LassoFit<F> {
    /// Coefficients and intercept mapped back to the raw feature scale.
    pub fn raw(&self, std: &Standardizer<F>) -> (Vec<F>, F) {
        let mut b0 = self.intercept;
        let coefs: Vec<F> = (0..self.coefficients.len())
            .map(|j| {
                let b = self.coefficients[j] / std.scale[j];
                b0 -= b * std.mean[j];
                b
            })
            .collect();
        (coefs, b0)
    }

    pub fn nonzero(&self) -> Vec<usize> {
        (0..self.coefficients.len()).filter(|&j| self.coefficients[j] != F::zero()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    /// Penalty grid; `None` gives the default log-spaced grid from `λ_max`.
    pub grid: Option<Vec<f64>>,
    pub folds: usize,
    pub seed: u64,
}

impl LassoConfig {
    pub fn new(seed: u64) -> Self {
        LassoConfig {
            grid: None,
            folds: 10,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSelection {
    pub mask: FeatureMask,
    pub lambda: f64,
    pub lambda_max: f64,
    pub grid: Vec<f64>,
    pub cv_deviance: Vec<f64>,
}

fn indicator<F: Scalar>(y: &[Label]) -> Vec<F> {
    y.iter().map(|l| if l.is_pd() { F::one() } else { F::zero() }).collect()
}

fn check(x: ArrayView2<impl Scalar>, y: &[Label]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    for class in [Label::Normal, Label::EarlyPd] {
        if !y.contains(&class) {
            return Err(Error::ClassAbsent(class.name()));
        }
    }
    Ok(())
}

/// Smallest penalty at which every coefficient is zero:
/// `max_j |z_jᵀ(y − ȳ)| / n` over standardized columns.
pub fn lambda_max<F: Scalar>(x: ArrayView2<F>, y: &[Label]) -> Result<f64> {
    check(x, y)?;
    let std = Standardizer::fit(x);
    Ok(lambda_max_std(&std.columns(x), &indicator::<F>(y)).to_f64_lossy())
}

fn lambda_max_std<F: Scalar>(z: &[Vec<F>], y: &[F]) -> F {
    let n = F::lit(y.len() as f64);
    let ybar = y.iter().copied().sum::<F>() / n;
    z.iter()
        .map(|col| (col.iter().zip(y).map(|(&a, &b)| a * (b - ybar)).sum::<F>() / n).abs())
        .fold(F::zero(), F::max)
}

/// `points` log-spaced values from `lmax` down to `lmax · ratio`.
pub fn lasso_grid(lmax: f64, points: usize, ratio: f64) -> Vec<f64> {
    if points <= 1 {
        return vec![lmax];
    }
    let step = ratio.ln() / (points - 1) as f64;
    (0..points).map(|i| lmax * (step * i as f64).exp()).collect()
}

/// Coordinate-descent state on a standardized design.
struct Path<'a, F> {
    z: &'a [Vec<F>],
    y: &'a [F],
    beta: Vec<F>,
    active: Vec<bool>,
    b0: F,
    eta: Vec<F>,
    loss: F,
}

impl<'a, F: Scalar> Path<'a, F> {
    fn new(z: &'a [Vec<F>], y: &'a [F]) -> Self {
        let n = F::lit(y.len() as f64);
        let ybar = y.iter().copied().sum::<F>() / n;
        let b0 = (ybar / (F::one() - ybar)).ln();
        let eta = vec![b0; y.len()];
        let mut p = Path {
            z,
            y,
            beta: vec![F::zero(); z.len()],
            active: vec![false; z.len()],
            b0,
            eta,
            loss: F::zero(),
        };
        p.loss = p.mean_loss(&p.eta);
        p
    }

    fn mean_loss(&self, eta: &[F]) -> F {
        let n = F::lit(self.y.len() as f64);
        eta.iter().zip(self.y).map(|(&e, &y)| softplus(e) - y * e).sum::<F>() / n
    }

    fn shifted_loss(&self, col: Option<&[F]>, delta: F) -> F {
        let n = F::lit(self.y.len() as f64);
        let mut s = F::zero();
        for i in 0..self.y.len() {
            let e = self.eta[i] + col.map_or(delta, |c| c[i] * delta);
            s += softplus(e) - self.y[i] * e;
        }
        s / n
    }

    fn objective(&self, lambda: F) -> F {
        self.loss + lambda * self.beta.iter().map(|b| b.abs()).sum::<F>()
    }

    /// One proximal-Newton update of coordinate `j` (`None` is the
    /// intercept) with backtracking; returns the absolute change.
    fn update(&mut self, j: Option<usize>, lambda: F) -> F {
        let n = F::lit(self.y.len() as f64);
        let col = j.map(|j| self.z[j].as_slice());
        let (mut g, mut h) = (F::zero(), F::zero());
        for i in 0..self.y.len() {
            let p = sigmoid(self.eta[i]);
            let x = col.map_or(F::one(), |c| c[i]);
            g += x * (p - self.y[i]);
            h += p * (F::one() - p) * x * x;
        }
        g /= n;
        h = (h / n).max(F::lit(1e-12));
        let (old, pen) = match j {
            Some(j) => (self.beta[j], lambda),
            None => (self.b0, F::zero()),
        };
        let u = h * old - g;
        let target = u.signum() * (u.abs() - pen).max(F::zero()) / h;
        let d = target - old;
        if d == F::zero() {
            return F::zero();
        }
        let base = self.loss + pen * old.abs();
        let mut t = F::one();
        for _ in 0..40 {
            let cand = old + t * d;
            let step = cand - old;
            let loss = self.shifted_loss(col, step);
            if loss + pen * cand.abs() <= base {
                for i in 0..self.eta.len() {
                    self.eta[i] += col.map_or(step, |c| c[i] * step);
                }
                self.loss = loss;
                match j {
                    Some(j) => self.beta[j] = cand,
                    None => self.b0 = cand,
                }
                return step.abs();
            }
            t /= F::lit(2.0);
        }
        F::zero()
    }

    /// Minimises along one coordinate by repeated Newton updates.
    fn minimise(&mut self, j: Option<usize>, lambda: F) -> F {
        let tol = F::tolerance(COEF_TOL) / F::lit(10.0);
        let mut total = F::zero();
        for _ in 0..INNER_NEWTON {
            let change = self.update(j, lambda);
            total += change;
            if change <= tol {
                break;
            }
        }
        total
    }

    fn sweep(&mut self, lambda: F) -> F {
        let mut max_change = self.minimise(None, lambda);
        for j in 0..self.z.len() {
            if self.active[j] {
                max_change = max_change.max(self.minimise(Some(j), lambda));
            }
        }
        max_change
    }

    fn gradient(&self, j: usize) -> F {
        let n = F::lit(self.y.len() as f64);
        let col = &self.z[j];
        (0..self.y.len())
            .map(|i| col[i] * (sigmoid(self.eta[i]) - self.y[i]))
            .sum::<F>()
            / n
    }

    /// Runs to convergence at `lambda`, returning sweeps used and the
    /// objective after each sweep. Coordinates join the active set one at
    /// a time, most violated KKT condition first.
    fn solve(&mut self, lambda: F) -> (usize, Vec<F>) {
        let tol = F::tolerance(COEF_TOL);
        let mut sweeps = 0;
        let mut trace = Vec::new();
        loop {
            while sweeps < MAX_SWEEPS {
                let change = self.sweep(lambda);
                sweeps += 1;
                trace.push(self.objective(lambda));
                if change < tol {
                    break;
                }
            }
            if sweeps >= MAX_SWEEPS {
                break;
            }
            let mut worst: Option<(usize, F)> = None;
            for j in 0..self.z.len() {
                if self.active[j] {
                    continue;
                }
                let v = self.gradient(j).abs() - lambda;
                if v > tol && worst.is_none_or(|(_, w)| v > w) {
                    worst = Some((j, v));
                }
            }
            match worst {
                Some((j, _)) => self.active[j] = true,
                None => break,
            }
        }
        (sweeps, trace)
    }

    fn snapshot(&self, lambda: f64, p: usize, active: &[usize], sweeps: usize, trace: Vec<F>) -> LassoFit<F> {
        let mut coefficients = vec![F::zero(); p];
        for (k, &j) in active.iter().enumerate() {
            coefficients[j] = self.beta[k];
        }
        LassoFit {
            lambda,
            intercept: self.b0,
            coefficients,
            sweeps,
            objective_trace: trace,
        }
    }
}

/// Fits at a single penalty from a cold start.
pub fn lasso_fit<F: Scalar>(x: ArrayView2<F>, y: &[Label], lambda: f64) -> Result<(LassoFit<F>, Standardizer<F>)> {
    check(x, y)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be non-negative, got {lambda}")));
    }
    let std = Standardizer::fit(x);
    let z = std.columns(x);
    let yv = indicator::<F>(y);
    let mut path = Path::new(&z, &yv);
    let (sweeps, trace) = path.solve(F::lit(lambda));
    Ok((path.snapshot(lambda, x.ncols(), &std.active, sweeps, trace), std))
}

/// Warm-started fits along a decreasing grid.
fn fit_path<F: Scalar>(x: ArrayView2<F>, y: &[Label], grid: &[f64]) -> (Vec<LassoFit<F>>, Standardizer<F>) {
    let std = Standardizer::fit(x);
    let z = std.columns(x);
    let yv = indicator::<F>(y);
    let mut path = Path::new(&z, &yv);
    let fits = grid
        .iter()
        .map(|&l| {
            let (sweeps, trace) = path.solve(F::lit(l));
            path.snapshot(l, x.ncols(), &std.active, sweeps, trace)
        })
        .collect();
    (fits, std)
}

fn mean_deviance<F: Scalar>(fit: &LassoFit<F>, std: &Standardizer<F>, x: ArrayView2<F>, y: &[Label]) -> f64 {
    let (coefs, b0) = fit.raw(std);
    let mut ll = 0.0;
    for (row, l) in x.rows().into_iter().zip(y) {
        let eta = row.iter().zip(&coefs).fold(b0, |s, (&v, &b)| s + v * b).to_f64_lossy();
        let yy = if l.is_pd() { 1.0 } else { 0.0 };
        ll += yy * eta - softplus(eta);
    }
    -2.0 * ll / y.len() as f64
}

/// Chooses λ by minimum mean cross-validated deviance and returns the
/// columns with nonzero coefficients at that λ on the full training data.
/// `groups` keeps grouped rows (e.g. a subject's visits) in one inner fold.
pub fn lasso_select<F: Scalar>(
    x: ArrayView2<F>,
    y: &[Label],
    config: &LassoConfig,
    groups: Option<&[usize]>,
) -> Result<LassoSelection> {
    check(x, y)?;
    let lmax = lambda_max(x, y)?;
    let grid = match &config.grid {
        Some(g) if g.is_empty() => return Err(Error::InvalidInput("empty lambda grid".into())),
        Some(g) => {
            let mut g = g.clone();
            g.sort_by(|a, b| b.total_cmp(a));
            g
        }
        None => lasso_grid(lmax, GRID_POINTS, GRID_RATIO),
    };
    let assignment = stratified_assignment(y, groups, config.folds, config.seed)?;
    let mut dev = vec![0.0; grid.len()];
    for f in 0..config.folds {
        let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
        let xt = x.select(ndarray::Axis(0), &train);
        let yt: Vec<Label> = train.iter().map(|&i| y[i]).collect();
        let xv = x.select(ndarray::Axis(0), &test);
        let yv: Vec<Label> = test.iter().map(|&i| y[i]).collect();
        let (fits, std) = fit_path(xt.view(), &yt, &grid);
        for (k, fit) in fits.iter().enumerate() {
            dev[k] += mean_deviance(fit, &std, xv.view(), &yv) / config.folds as f64;
        }
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| dev[a].total_cmp(&dev[b]))
        .expect("non-empty grid");
    let (fits, _) = fit_path(x, y, &grid[..=best]);
    if fits.iter().all(|f| f.nonzero().is_empty()) {
        let (all, _) = fit_path(x, y, &grid);
        if all.iter().all(|f| f.nonzero().is_empty()) {
            return Err(Error::NoFeaturesSelected);
        }
    }
    let chosen = fits.last().expect("non-empty path");
    let mask = FeatureMask::new(chosen.nonzero(), x.ncols())?;
    Ok(LassoSelection {
        mask,
        lambda: grid[best],
        lambda_max: lmax,
        grid,
        cv_deviance: dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::fit_logistic;
    use ndarray::Array2;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = crate::seed::rng(seed);
        let x = Array2::from_shape_fn((n, 4), |(_, j)| rng.random::<f64>() * (j + 1) as f64);
        let y = x
            .rows()
            .into_iter()
            .map(|r| {
                let eta = 1.5 * r[0] - 0.8 * r[1] + 0.1 * r[3] - 0.3;
                Label::from_pd(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        (x, y)
    }

    #[test]
    fn zero_at_lambda_max() {
        let (x, y) = data(400, 1);
        let lm = lambda_max(x.view(), &y).unwrap();
        let (fit, _) = lasso_fit(x.view(), &y, lm).unwrap();
        assert!(fit.nonzero().is_empty());
        let (fit, _) = lasso_fit(x.view(), &y, lm * 0.9).unwrap();
        assert!(!fit.nonzero().is_empty());
    }

    #[test]
    fn unpenalised_matches_irls() {
        let (x, y) = data(400, 2);
        let (fit, std) = lasso_fit(x.view(), &y, 0.0).unwrap();
        let (coefs, b0) = fit.raw(&std);
        let irls = fit_logistic(x.view(), &y).unwrap();
        for (a, b) in coefs.iter().zip(&irls.coefficients) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!((b0 - irls.intercept).abs() < 1e-4);
    }

    #[test]
    fn objective_monotone() {
        let (x, y) = data(300, 3);
        let lm = lambda_max(x.view(), &y).unwrap();
        for frac in [0.5, 0.1, 0.01, 0.0] {
            let (fit, _) = lasso_fit(x.view(), &y, lm * frac).unwrap();
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }

    #[test]
    fn duplicate_column_at_most_one() {
        let (mut x, y) = data(400, 4);
        let c0 = x.column(0).to_owned();
        x.column_mut(2).assign(&c0);
        let lm = lambda_max(x.view(), &y).unwrap();
        let (fit, _) = lasso_fit(x.view(), &y, lm * 0.3).unwrap();
        let nz = fit.nonzero();
        assert!(!(nz.contains(&0) && nz.contains(&2)), "{nz:?}");
    }

    #[test]
    fn selection_keeps_signal() {
        let (x, y) = data(600, 5);
        let sel = lasso_select(x.view(), &y, &LassoConfig::new(7), None).unwrap();
        assert!(sel.mask.contains(0) && sel.mask.contains(1));
        assert_eq!(sel.grid.len(), GRID_POINTS);
        assert!((sel.grid[0] - sel.lambda_max).abs() < 1e-15);
        let harsh = LassoConfig {
            grid: Some(vec![sel.lambda_max * 2.0]),
            ..LassoConfig::new(7)
        };
        assert!(matches!(
            lasso_select(x.view(), &y, &harsh, None),
            Err(Error::NoFeaturesSelected)
        ));
    }
}
