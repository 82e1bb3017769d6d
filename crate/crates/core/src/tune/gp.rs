//! Gaussian-process regression with a squared-exponential ARD kernel.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use ndarray::{Array1, Array2};
use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::linalg::Cholesky;

pub const NOISE_FLOOR: f64 = 1e-6;
const LOG_LENGTH: (f64, f64) = (-2.0 * std::f64::consts::LN_10, std::f64::consts::LN_10); // ln 0.01, ln 10
const LOG_SIGNAL: (f64, f64) = (-std::f64::consts::LN_10, std::f64::consts::LN_10);
const LOG_NOISE: (f64, f64) = (-9.210_340_371_976_184, 0.0);
const RESTARTS: usize = 4;

struct Objective<'a>(&'a dyn Fn(&[f64]) -> f64);

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

/// Nelder-Mead from `start` with an axis-aligned initial simplex of side
/// `step`; returns the best point and value.
pub(crate) fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64, iters: u64) -> Option<(Vec<f64>, f64)> {
    let mut simplex = vec![start.to_vec()];
    for k in 0..start.len() {
        let mut v = start.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).ok()?;
    let res = Executor::new(Objective(&f), solver)
        .configure(|s| s.max_iters(iters))
        .run()
        .ok()?;
    let state = res.state();
    Some((state.get_best_param()?.clone(), state.get_best_cost()))
}

pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gap = best - mean;
    if !(sd > 1e-12) {
        return gap.max(0.0);
    }
    let z = gap / sd;
    let n = Normal::standard();
    (gap * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    length: Vec<f64>,
    signal_var: f64,
    noise_var: f64,
    chol: Cholesky<f64>,
    alpha: Array1<f64>,
}

fn kernel(a: &[f64], b: &[f64], length: &[f64], signal_var: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).zip(length).map(|((u, v), l)| ((u - v) / l).powi(2)).sum();
    signal_var * (-0.5 * d2).exp()
}

fn unpack(theta: &[f64], d: usize) -> (Vec<f64>, f64, f64) {
    let length = theta[..d].iter().map(|t| t.clamp(LOG_LENGTH.0, LOG_LENGTH.1).exp()).collect();
    let signal = (2.0 * theta[d].clamp(LOG_SIGNAL.0, LOG_SIGNAL.1)).exp();
    let noise = NOISE_FLOOR + (2.0 * theta[d + 1].clamp(LOG_NOISE.0, LOG_NOISE.1)).exp();
    (length, signal, noise)
}

fn gram(x: &[Vec<f64>], length: &[f64], signal: f64, noise: f64) -> Array2<f64> {
    let m = x.len();
    Array2::from_shape_fn((m, m), |(i, j)| {
        kernel(&x[i], &x[j], length, signal) + if i == j { noise } else { 0.0 }
    })
}

fn neg_log_marginal(x: &[Vec<f64>], y: &Array1<f64>, theta: &[f64]) -> f64 {
    let (length, signal, noise) = unpack(theta, x[0].len());
    let k = gram(x, &length, signal, noise);
    let Some(chol) = Cholesky::new(k.view(), 1e-14) else {
        return 1e10;
    };
    let alpha = chol.solve(y.view());
    0.5 * y.dot(&alpha) + 0.5 * chol.log_det() + 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

impl GaussianProcess {
    /// Fits kernel hyperparameters by maximum marginal likelihood with
    /// random restarts. `None` when the targets are constant.
    pub fn fit<R: Rng>(x: &[Vec<f64>], ys: &[f64], rng: &mut R) -> Option<Self> {
        let m = ys.len() as f64;
        let y_mean = ys.iter().sum::<f64>() / m;
        let y_sd = (ys.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / m).sqrt();
        if !(y_sd > 1e-12 * y_mean.abs().max(1.0)) {
            return None;
        }
        let y: Array1<f64> = ys.iter().map(|v| (v - y_mean) / y_sd).collect();
        let d = x[0].len();

        let mut starts = vec![{
            let mut t = vec![(0.3f64).ln(); d];
            t.push(0.0);
            t.push((0.01f64).ln());
            t
        }];
        for _ in 0..RESTARTS {
            let mut t: Vec<f64> = (0..d).map(|_| rng.random_range(LOG_LENGTH.0..LOG_LENGTH.1)).collect();
            t.push(rng.random_range(LOG_SIGNAL.0..LOG_SIGNAL.1));
            t.push(rng.random_range(LOG_NOISE.0..LOG_NOISE.1));
            starts.push(t);
        }
        let nll = |t: &[f64]| neg_log_marginal(x, &y, t);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in &starts {
            let cand = nelder_mead(nll, s, 0.5, 200).unwrap_or_else(|| (s.clone(), nll(s)));
            if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
        let (theta, _) = best?;
        let (length, signal_var, noise_var) = unpack(&theta, d);
        let k = gram(x, &length, signal_var, noise_var);
        let chol = Cholesky::new(k.view(), 0.0)?;
        let alpha = chol.solve(y.view());
        Some(GaussianProcess {
            x: x.to_vec(),
            y: y.to_vec(),
            y_mean,
            y_sd,
            length,
            signal_var,
            noise_var,
            chol,
            alpha,
        })
    }

    /// Posterior mean and latent standard deviation on the standardized scale.
    pub fn predict(&self, u: &[f64]) -> (f64, f64) {
        let ks: Array1<f64> = self.x.iter().map(|xi| kernel(xi, u, &self.length, self.signal_var)).collect();
        let mean = ks.dot(&self.alpha);
        let v = self.chol.solve_lower(ks.view());
        let var = (self.signal_var - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }

    pub fn best_standardized(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_original(&self, standardized: f64) -> f64 {
        self.y_mean + self.y_sd * standardized
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_matches_monte_carlo() {
        let mut rng = crate::seed::rng(5);
        let n = Normal::standard();
        for _ in 0..10 {
            let mean: f64 = rng.random_range(-2.0..2.0);
            let sd: f64 = rng.random_range(0.05..1.5);
            let best: f64 = rng.random_range(-2.0..2.0);
            let draws = 200_000;
            let mc: f64 = (0..draws)
                .map(|_| {
                    let u: f64 = rng.random_range(1e-12..1.0);
                    let f = mean + sd * n.inverse_cdf(u);
                    (best - f).max(0.0)
                })
                .sum::<f64>()
                / draws as f64;
            let ei = expected_improvement(mean, sd, best);
            assert!(ei >= 0.0);
            assert!((ei - mc).abs() < 1e-2, "{ei} vs {mc}");
        }
    }

    #[test]
    fn interpolates_smooth_function() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin()).collect();
        let gp = GaussianProcess::fit(&x, &y, &mut crate::seed::rng(1)).unwrap();
        let (m, s) = gp.predict(&[0.5]);
        assert!((gp.to_original(m) - 3.0f64.sin()).abs() < 0.05);
        assert!(s < 0.2);
        assert!(gp.noise_var() >= NOISE_FLOOR);
    }
}
