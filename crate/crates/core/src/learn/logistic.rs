//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares, the published scoring model, and likelihood-based diagnostics.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cohort::{Label, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::scalar::{sigmoid, softplus, Scalar};

const MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const SEPARATION_BOUND: f64 = 30.0;
const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LogisticModel<F> {
    pub coefficients: Vec<F>,
    pub intercept: F,
    pub feature_names: Vec<String>,
    /// Set when a standardized coefficient exceeded the separation bound.
    #[serde(default)]
    pub separation_warning: bool,
    /// Constant input columns fixed at zero during the fit.
    #[serde(default)]
    pub dropped_features: Vec<usize>,
    #[serde(default)]
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticScore<F> {
    pub probability: F,
    pub linear_score: F,
    pub contributions: Vec<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub model_chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    pub cox_snell_r2: f64,
    pub nagelkerke_r2: f64,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
}

/// The coefficients of the published model, in canonical feature order.
pub const PAPER_EQ1_COEFFICIENTS: [f64; 22] = [
    -0.41803,  // P1_SLPN
    0.026638,  // P1_SLPD
    -0.33983,  // P1_PAIN
    0.022716,  // P1_URIN
    1.0682,    // P1_CNST
    0.16622,   // P1_LTHD
    -0.49868,  // P1_FATG
    1.6894,    // P2_SPCH
    0.7519,    // P2_SALV
    0.90309,   // P2_SWAL
    2.2193,    // P2_EAT
    1.4171,    // P2_DRES
    2.1455,    // P2_HYGN
    1.1211,    // P2_HWRT
    0.57116,   // P2_HOBB
    0.70782,   // P2_TURN
    4.3677,    // P2_TRMR
    0.72112,   // P2_RISE
    0.3455,    // P2_WALK
    1.1776,    // P2_FREZ
    -0.41561,  // GENDER
    -0.031956, // AGE
];
pub const PAPER_EQ1_INTERCEPT: f64 = 0.54813;

impl<F: Scalar> LogisticModel<F> {
    pub fn new(coefficients: Vec<F>, intercept: F, feature_names: Vec<String>) -> Result<Self> {
        if coefficients.len() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                got: coefficients.len(),
            });
        }
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite logistic coefficient".into()));
        }
        Ok(LogisticModel {
            coefficients,
            intercept,
            feature_names,
            separation_warning: false,
            dropped_features: Vec::new(),
            iterations: 0,
        })
    }

    /// The published screening model over the 22 canonical features.
    pub fn paper_eq1() -> Self {
        LogisticModel::new(
            PAPER_EQ1_COEFFICIENTS.iter().map(|&c| F::lit(c)).collect(),
            F::lit(PAPER_EQ1_INTERCEPT),
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        )
        .expect("built-in model is well formed")
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn linear_score(&self, x: &[F]) -> Result<F> {
        self.check_dim(x.len())?;
        Ok(self.eta(x))
    }

    fn eta(&self, x: &[F]) -> F {
        self.coefficients
            .iter()
            .zip(x)
            .fold(F::zero(), |acc, (&b, &v)| acc + b * v)
            + self.intercept
    }

    fn eta_row(&self, row: ArrayView1<F>) -> F {
        self.coefficients
            .iter()
            .zip(row.iter())
            .fold(F::zero(), |acc, (&b, &v)| acc + b * v)
            + self.intercept
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got,
            });
        }
        Ok(())
    }

    pub fn probability(&self, x: &[F]) -> Result<F> {
        Ok(sigmoid(self.linear_score(x)?))
    }

    /// Log-likelihood `Σ y·η − softplus(η)` over the rows of `x`.
    pub fn log_likelihood(&self, x: ArrayView2<F>, y: &[Label]) -> Result<F> {
        self.check_dim(x.ncols())?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let mut ll = F::zero();
        for (row, &label) in x.rows().into_iter().zip(y) {
            ll += row_log_likelihood(self.eta_row(row), label);
        }
        Ok(ll)
    }

    /// Score vector `∂LL/∂(β, intercept)`; the intercept component is last.
    pub fn score_vector(&self, x: ArrayView2<F>, y: &[Label]) -> Result<Vec<F>> {
        self.check_dim(x.ncols())?;
        let p = x.ncols();
        let mut g = vec![F::zero(); p + 1];
        for (row, &label) in x.rows().into_iter().zip(y) {
            let eta = self.eta_row(row);
            let r = indicator::<F>(label) - sigmoid(eta);
            for j in 0..p {
                g[j] += r * row[j];
            }
            g[p] += r;
        }
        Ok(g)
    }
}

fn indicator<F: Scalar>(label: Label) -> F {
    if label.is_pd() {
        F::one()
    } else {
        F::zero()
    }
}

fn row_log_likelihood<F: Scalar>(eta: F, label: Label) -> F {
    indicator::<F>(label) * eta - softplus(eta)
}

/// `logit(p̄)`, the maximum-likelihood intercept of the null model.
pub fn null_intercept(y: &[Label]) -> Result<f64> {
    let n_pd = y.iter().filter(|l| l.is_pd()).count();
    if n_pd == 0 || n_pd == y.len() {
        return Err(Error::SingleClass);
    }
    let p = n_pd as f64 / y.len() as f64;
    Ok((p / (1.0 - p)).ln())
}

/// Probability, linear score and per-feature contributions `βᵢxᵢ`.
pub fn logistic_score<F: Scalar>(model: &LogisticModel<F>, x: &[F]) -> Result<LogisticScore<F>> {
    model.check_dim(x.len())?;
    let contributions: Vec<F> = model.coefficients.iter().zip(x).map(|(&b, &v)| b * v).collect();
    let linear_score = model.eta(x);
    Ok(LogisticScore {
        probability: sigmoid(linear_score),
        linear_score,
        contributions,
    })
}

pub fn fit_logistic<F: Scalar>(x: ArrayView2<F>, y: &[Label]) -> Result<LogisticModel<F>> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entry in design matrix".into()));
    }
    let b0 = null_intercept(y)?;
    let yv: Vec<F> = y.iter().map(|&l| indicator(l)).collect();

    let mut active = Vec::with_capacity(p);
    let mut dropped = Vec::new();
    let mut scale = vec![F::zero(); p];
    for j in 0..p {
        let col = x.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            dropped.push(j);
        } else {
            let mean = col.sum() / F::lit(n as f64);
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / F::lit((n - 1).max(1) as f64);
            scale[j] = var.sqrt();
            active.push(j);
        }
    }
    if !dropped.is_empty() {
        warn!("logistic fit: constant columns {dropped:?} dropped");
    }

    // Working design with the intercept in the last column.
    let q = active.len() + 1;
    let mut beta = Array1::<F>::zeros(q);
    beta[q - 1] = F::lit(b0);
    let design_row = |i: usize, k: usize| -> F {
        if k + 1 == q {
            F::one()
        } else {
            x[[i, active[k]]]
        }
    };

    let tol = F::tolerance(SCORE_TOL);
    let rel_tol = F::tolerance(1e-13);
    let mut eta = vec![F::zero(); n];
    let mut iterations = 0;
    let mut separation = false;

    let compute = |beta: &Array1<F>, eta: &mut [F]| -> F {
        let mut ll = F::zero();
        for i in 0..n {
            let mut e = beta[q - 1];
            for k in 0..q - 1 {
                e += beta[k] * x[[i, active[k]]];
            }
            eta[i] = e;
            ll += yv[i] * e - softplus(e);
        }
        ll
    };
    let mut ll = compute(&beta, &mut eta);

    while iterations < MAX_ITER {
        let mut g = Array1::<F>::zeros(q);
        let mut h = Array2::<F>::zeros((q, q));
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            let w = pi * (F::one() - pi);
            let r = yv[i] - pi;
            for a in 0..q {
                let xa = design_row(i, a);
                g[a] += r * xa;
                let wxa = w * xa;
                for b in 0..=a {
                    h[[a, b]] += wxa * design_row(i, b);
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                h[[b, a]] = h[[a, b]];
            }
        }
        let gmax = g.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        if gmax <= tol {
            break;
        }
        let chol = match Cholesky::new(h.view(), rel_tol) {
            Some(c) => c,
            None => {
                let jitter = F::lit(RIDGE) * (0..q).map(|a| h[[a, a]]).fold(F::one(), F::max);
                for a in 0..q {
                    h[[a, a]] += jitter;
                }
                Cholesky::new(h.view(), F::zero()).ok_or(Error::Singular)?
            }
        };
        let step = chol.solve(g.view());
        iterations += 1;

        // Step halving keeps the likelihood monotone.
        let mut t = F::one();
        let mut accepted = false;
        let mut trial_eta = vec![F::zero(); n];
        for _ in 0..30 {
            let trial = &beta + &(&step * t);
            let trial_ll = compute(&trial, &mut trial_eta);
            if trial_ll >= ll || !ll.is_finite() {
                beta = trial;
                ll = trial_ll;
                std::mem::swap(&mut eta, &mut trial_eta);
                accepted = true;
                break;
            }
            t /= F::lit(2.0);
        }
        if !accepted {
            break;
        }
        if (0..q - 1).any(|k| (beta[k] * scale[active[k]]).abs() > F::lit(SEPARATION_BOUND)) {
            separation = true;
            warn!("logistic fit: quasi-separation detected after {iterations} iterations");
            break;
        }
    }

    let mut coefficients = vec![F::zero(); p];
    for (k, &j) in active.iter().enumerate() {
        coefficients[j] = beta[k];
    }
    if coefficients.iter().any(|c| !c.is_finite()) || !beta[q - 1].is_finite() {
        return Err(Error::NonConvergence("logistic coefficients diverged".into()));
    }
    Ok(LogisticModel {
        coefficients,
        intercept: beta[q - 1],
        feature_names: (0..p).map(|j| format!("x{j}")).collect(),
        separation_warning: separation,
        dropped_features: dropped,
        iterations,
    })
}

/// Model chi-square, its p-value, and the Cox-Snell and Nagelkerke R².
pub fn goodness_of_fit<F: Scalar>(model: &LogisticModel<F>, x: ArrayView2<F>, y: &[Label]) -> Result<FitDiagnostics> {
    if y.is_empty() {
        return Err(Error::InvalidInput("empty data".into()));
    }
    let b0 = F::lit(null_intercept(y)?);
    let null = LogisticModel {
        coefficients: vec![F::zero(); model.n_features()],
        intercept: b0,
        feature_names: model.feature_names.clone(),
        separation_warning: false,
        dropped_features: Vec::new(),
        iterations: 0,
    };
    let ll_model = model.log_likelihood(x, y)?.to_f64_lossy();
    let ll_null = null.log_likelihood(x, y)?.to_f64_lossy();
    Ok(diagnostics_from_log_likelihoods(ll_model, ll_null, y.len(), model.n_features()))
}

pub fn diagnostics_from_log_likelihoods(ll_model: f64, ll_null: f64, n: usize, df: usize) -> FitDiagnostics {
    let chi = 2.0 * (ll_model - ll_null);
    let p_value = if chi <= 0.0 || df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map(|d| crate::stats::clean_p(d.sf(chi)))
            .unwrap_or(f64::NAN)
    };
    let nf = n as f64;
    let cox = 1.0 - ((2.0 / nf) * (ll_null - ll_model)).exp();
    let max_cox = 1.0 - ((2.0 / nf) * ll_null).exp();
    FitDiagnostics {
        model_chi_square: chi,
        df,
        p_value,
        cox_snell_r2: cox,
        nagelkerke_r2: cox / max_cox,
        log_likelihood: ll_model,
        null_log_likelihood: ll_null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn paper() -> LogisticModel<f64> {
        LogisticModel::paper_eq1()
    }

    #[test]
    fn eq1_hand_values() {
        let m = paper();
        let mut x = [0.0; 22];
        let s = logistic_score(&m, &x).unwrap();
        assert!((s.linear_score - 0.54813).abs() < 1e-12);
        assert!((s.probability - 0.6337).abs() < 1e-4);
        x[21] = 66.42;
        let s = logistic_score(&m, &x).unwrap();
        assert!((s.linear_score - (-1.5744)).abs() < 1e-4);
        assert!((s.probability - 0.1716).abs() < 1e-4);
        let mut x = [0.0; 22];
        x[16] = 4.0;
        x[21] = 66.0;
        x[20] = 1.0;
        let s = logistic_score(&m, &x).unwrap();
        assert!((s.linear_score - 15.494).abs() < 1e-3);
        assert!(s.probability > 0.9999);
        let sum: f64 = s.contributions.iter().sum();
        assert!((sum - (s.linear_score - PAPER_EQ1_INTERCEPT)).abs() < 1e-12);
        assert!(logistic_score(&m, &[0.0; 3]).is_err());
    }

    fn simulate(n: usize, beta: &[f64], b0: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = crate::seed::rng(seed);
        let x = Array2::from_shape_fn((n, beta.len()), |_| rng.random::<f64>() * 4.0 - 2.0);
        let y = x
            .rows()
            .into_iter()
            .map(|r| {
                let eta: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + b0;
                Label::from_pd(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        (x, y)
    }

    #[test]
    fn recovers_known_model() {
        let (x, y) = simulate(20_000, &[1.0, -0.5], 0.25, 3);
        let m = fit_logistic(x.view(), &y).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 0.1);
        assert!((m.coefficients[1] + 0.5).abs() < 0.1);
        assert!((m.intercept - 0.25).abs() < 0.1);
        let g = m.score_vector(x.view(), &y).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn f32_fit_agrees() {
        let (x, y) = simulate(2000, &[1.0, -0.5], 0.25, 5);
        let m64 = fit_logistic(x.view(), &y).unwrap();
        let x32 = x.mapv(|v| v as f32);
        let m32 = fit_logistic(x32.view(), &y).unwrap();
        for (a, b) in m64.coefficients.iter().zip(&m32.coefficients) {
            assert!((a - *b as f64).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_column_dropped() {
        let (mut x, y) = simulate(500, &[1.0, 0.0], 0.0, 9);
        x.column_mut(1).fill(3.0);
        let m = fit_logistic(x.view(), &y).unwrap();
        assert_eq!(m.dropped_features, vec![1]);
        assert_eq!(m.coefficients[1], 0.0);
    }

    #[test]
    fn separation_flagged() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64);
        let y: Vec<Label> = (0..40).map(|i| Label::from_pd(i >= 20)).collect();
        let m = fit_logistic(x.view(), &y).unwrap();
        assert!(m.separation_warning);
        let d = goodness_of_fit(&m, x.view(), &y).unwrap();
        assert!(d.nagelkerke_r2 > 0.95);
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::<f64>::zeros((5, 1));
        assert!(matches!(fit_logistic(x.view(), &[Label::EarlyPd; 5]), Err(Error::SingleClass)));
    }

    #[test]
    fn null_model_has_zero_chi_square() {
        let (x, y) = simulate(300, &[0.7, 0.2], -0.4, 11);
        let b0 = null_intercept(&y).unwrap();
        let m = LogisticModel::new(vec![0.0, 0.0], b0, vec!["a".into(), "b".into()]).unwrap();
        let d = goodness_of_fit(&m, x.view(), &y).unwrap();
        assert_eq!(d.model_chi_square, 0.0);
        assert_eq!(d.cox_snell_r2, 0.0);
        assert_eq!(d.nagelkerke_r2, 0.0);
        let fitted = fit_logistic(x.view(), &y).unwrap();
        let d = goodness_of_fit(&fitted, x.view(), &y).unwrap();
        assert!(d.model_chi_square > 0.0);
        assert!(0.0 <= d.cox_snell_r2 && d.cox_snell_r2 <= d.nagelkerke_r2 && d.nagelkerke_r2 <= 1.0);
    }

    #[test]
    fn cox_snell_closed_form() {
        let d = diagnostics_from_log_likelihoods(-34.66, -69.31, 100, 1);
        assert!((d.cox_snell_r2 - 0.50).abs() < 0.005);
    }
}
