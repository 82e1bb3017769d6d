//! AdaBoost.M1 over depth-limited CART trees.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::forest::{check_finite, check_labels};
use super::tree::{BinnedMatrix, Entry, Tree, TreeParams};
use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};
use crate::seed;

/// Error assigned to a perfect weak learner when computing its weight.
pub const PERFECT_LEARNER_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl BoostParams {
    pub fn new(n_rounds: usize, seed: u64) -> Self {
        BoostParams {
            n_rounds,
            max_depth: 2,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct BoostModel<F> {
    pub weak_learners: Vec<Tree<F>>,
    pub learner_weights: Vec<F>,
    /// Weighted training error of each learner on its own round's weights.
    pub round_errors: Vec<f64>,
    pub n_features: usize,
    pub params: BoostParams,
}

/// Per-round trace used to check the reweighting identity.
#[derive(Debug, Clone)]
pub struct BoostTrace<F> {
    /// Observation weights at the start of each round, plus the final ones.
    pub weights: Vec<Vec<F>>,
}

pub fn fit_boosted<F: Scalar>(x: ArrayView2<F>, y: &[Label], params: &BoostParams) -> Result<BoostModel<F>> {
    fit_boosted_traced(x, y, params, false).map(|(m, _)| m)
}

pub fn fit_boosted_traced<F: Scalar>(
    x: ArrayView2<F>,
    y: &[Label],
    params: &BoostParams,
    keep_trace: bool,
) -> Result<(BoostModel<F>, BoostTrace<F>)> {
    let (n, p) = x.dim();
    check_labels(n, y)?;
    check_finite(x)?;
    if params.n_rounds == 0 {
        return Err(Error::InvalidInput("n_rounds must be at least 1".into()));
    }
    let data = BinnedMatrix::new(x);
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth.max(1)),
        min_leaf: 1,
        max_features: None,
    };
    let mut rng = seed::rng(params.seed);
    let rows: Vec<Vec<F>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut w = vec![F::one() / F::lit(n as f64); n];
    let mut trace = BoostTrace { weights: Vec::new() };
    let mut learners = Vec::new();
    let mut alphas = Vec::new();
    let mut errors = Vec::new();
    let mut wrong = vec![false; n];

    for round in 0..params.n_rounds {
        if keep_trace {
            trace.weights.push(w.clone());
        }
        let entries: Vec<Entry<F>> = (0..n).map(|i| Entry { row: i as u32, weight: w[i] }).collect();
        let tree = Tree::fit(&data, y, entries, &tree_params, &mut rng);
        let mut eps = F::zero();
        for i in 0..n {
            wrong[i] = tree.predict(&rows[i]) != y[i];
            if wrong[i] {
                eps += w[i];
            }
        }
        let eps_f = eps.to_f64_lossy();
        if eps_f >= 0.5 {
            if round == 0 {
                return Err(Error::EmptyEnsemble(eps_f));
            }
            break;
        }
        let perfect = eps_f <= 0.0;
        let eps_c = if perfect { F::lit(PERFECT_LEARNER_EPSILON) } else { eps };
        let alpha = F::lit(0.5) * ((F::one() - eps_c) / eps_c).ln();
        learners.push(tree);
        alphas.push(alpha);
        errors.push(eps_f);
        if perfect {
            break;
        }
        // Misclassified weights scale by 1/(2ε), the rest by 1/(2(1−ε)):
        // the normalised form of exp(±α).
        let up = F::one() / (F::lit(2.0) * eps);
        let down = F::one() / (F::lit(2.0) * (F::one() - eps));
        for i in 0..n {
            w[i] *= if wrong[i] { up } else { down };
        }
        let total: F = w.iter().copied().sum();
        w.iter_mut().for_each(|v| *v /= total);
    }
    if keep_trace {
        trace.weights.push(w);
    }
    Ok((
        BoostModel {
            weak_learners: learners,
            learner_weights: alphas,
            round_errors: errors,
            n_features: p,
            params: *params,
        },
        trace,
    ))
}

impl<F: Scalar> BoostModel<F> {
    /// `Σ αₜ hₜ(x)` with `hₜ ∈ {−1, +1}`.
    pub fn margin(&self, x: &[F]) -> Result<F> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self
            .weak_learners
            .iter()
            .zip(&self.learner_weights)
            .fold(F::zero(), |acc, (t, &a)| if t.predict(x).is_pd() { acc + a } else { acc - a }))
    }

    /// Logistic of the margin normalised by `Σ αₜ`.
    pub fn score(&self, x: &[F]) -> Result<F> {
        let total: F = self.learner_weights.iter().copied().sum();
        Ok(sigmoid(self.margin(x)? / total))
    }

    /// Training error of the first `rounds` learners.
    pub fn staged_error(&self, x: ArrayView2<F>, y: &[Label], rounds: usize) -> f64 {
        let truncated = BoostModel {
            weak_learners: self.weak_learners[..rounds].to_vec(),
            learner_weights: self.learner_weights[..rounds].to_vec(),
            round_errors: Vec::new(),
            n_features: self.n_features,
            params: self.params,
        };
        let wrong = x
            .rows()
            .into_iter()
            .zip(y)
            .filter(|(r, l)| (truncated.margin(&r.to_vec()).unwrap() >= F::zero()) != l.is_pd())
            .count();
        wrong as f64 / y.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn noisy(n: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let y = x
            .rows()
            .into_iter()
            .map(|r| Label::from_pd(r[0] + r[1] + 0.3 * rng.random::<f64>() > 1.1))
            .collect();
        (x, y)
    }

    #[test]
    fn reweighting_identity() {
        let (x, y) = noisy(200, 1);
        let (m, trace) = fit_boosted_traced(x.view(), &y, &BoostParams::new(20, 0), true).unwrap();
        for (t, tree) in m.weak_learners.iter().enumerate() {
            if t + 1 >= trace.weights.len() {
                break;
            }
            let next = &trace.weights[t + 1];
            let err: f64 = (0..200)
                .filter(|&i| tree.predict(&x.row(i).to_vec()) != y[i])
                .map(|i| next[i])
                .sum();
            assert!((err - 0.5).abs() < 1e-10, "round {t}: {err}");
        }
        assert!(m.learner_weights.iter().all(|a| a.is_finite() && *a > 0.0));
    }

    #[test]
    fn alpha_closed_form() {
        let eps: f64 = 0.1;
        assert!((0.5 * ((1.0 - eps) / eps).ln() - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn unlearnable_is_empty_ensemble() {
        let x = Array2::<f64>::zeros((4, 2));
        let y = [Label::Normal, Label::EarlyPd, Label::Normal, Label::EarlyPd];
        assert!(matches!(
            fit_boosted(x.view(), &y, &BoostParams::new(10, 0)),
            Err(Error::EmptyEnsemble(e)) if e == 0.5
        ));
    }

    #[test]
    fn separable_error_non_increasing() {
        let n = 120;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 7 + j * 13) % 23) as f64);
        let y: Vec<Label> = (0..n).map(|i| Label::from_pd(x[[i, 0]] + x[[i, 1]] > 22.0)).collect();
        let m = fit_boosted(x.view(), &y, &BoostParams::new(60, 0)).unwrap();
        let errs: Vec<f64> = (1..=m.weak_learners.len()).map(|r| m.staged_error(x.view(), &y, r)).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
    }

    #[test]
    fn perfect_learner_stops() {
        let x = ndarray::array![[0.0], [1.0], [2.0], [3.0]];
        let y = [Label::Normal, Label::Normal, Label::EarlyPd, Label::EarlyPd];
        let m = fit_boosted(x.view(), &y, &BoostParams::new(10, 0)).unwrap();
        assert_eq!(m.weak_learners.len(), 1);
        assert!(m.score(&[3.0]).unwrap() > 0.5);
        assert!(m.score(&[0.0]).unwrap() < 0.5);
    }
}
