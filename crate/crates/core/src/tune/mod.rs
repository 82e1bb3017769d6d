//! Bayesian optimisation of a black-box objective over a bounded box:
//! Gaussian-process surrogate with expected-improvement acquisition.

mod gp;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{Hyperparameters, ModelKind};
use crate::seed;

pub use gp::{expected_improvement, GaussianProcess};

pub const DEFAULT_BUDGET: usize = 30;
const CANDIDATES: usize = 1000;
const REFINE_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
    pub integer: bool,
}

impl Dimension {
    pub fn new(name: &str, low: f64, high: f64, scale: Scale, integer: bool) -> Result<Self> {
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidInput(format!("dimension {name}: need low < high")));
        }
        if scale == Scale::Log && low <= 0.0 {
            return Err(Error::InvalidInput(format!("dimension {name}: log scale needs low > 0")));
        }
        Ok(Dimension {
            name: name.to_string(),
            low,
            high,
            scale,
            integer,
        })
    }

    /// Unit coordinate to value, rounded for integer dimensions.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = match self.scale {
            Scale::Linear => self.low + u * (self.high - self.low),
            Scale::Log => (self.low.ln() + u * (self.high.ln() - self.low.ln())).exp(),
        };
        let v = if self.integer { v.round() } else { v };
        v.clamp(self.low, self.high)
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (v - self.low) / (self.high - self.low),
            Scale::Log => (v.ln() - self.low.ln()) / (self.high.ln() - self.low.ln()),
        };
        u.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dimensions: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(Error::InvalidInput("search space has no dimensions".into()));
        }
        Ok(SearchSpace { dimensions })
    }

    pub fn dim(&self) -> usize {
        self.dimensions.len()
    }

    /// Default tuning box for a model family; `None` for untuned logistic.
    pub fn for_model(kind: ModelKind) -> Option<Self> {
        let d = |n, lo, hi, s, i| Dimension::new(n, lo, hi, s, i).expect("valid default");
        let dims = match kind {
            ModelKind::Logistic => return None,
            ModelKind::Forest => vec![
                d("n_trees", 50.0, 500.0, Scale::Linear, true),
                d("min_leaf", 1.0, 20.0, Scale::Linear, true),
            ],
            ModelKind::Boost => vec![
                d("n_rounds", 50.0, 500.0, Scale::Linear, true),
                d("max_depth", 1.0, 4.0, Scale::Linear, true),
            ],
            ModelKind::Svm => vec![
                d("c", 1e-2, 1e3, Scale::Log, false),
                d("gamma", 1e-4, 1e1, Scale::Log, false),
            ],
        };
        Some(SearchSpace { dimensions: dims })
    }

    fn point(&self, u: &[f64]) -> Vec<f64> {
        self.dimensions.iter().zip(u).map(|(d, &x)| d.from_unit(x)).collect()
    }

    fn named(&self, values: &[f64]) -> BTreeMap<String, f64> {
        self.dimensions.iter().zip(values).map(|(d, &v)| (d.name.clone(), v)).collect()
    }
}

/// Hyperparameters of `kind` from a tuned point.
pub fn hyperparameters_from_point(kind: ModelKind, point: &BTreeMap<String, f64>) -> Result<Hyperparameters> {
    let get = |k: &str| {
        point
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("tuned point lacks {k}")))
    };
    Ok(match kind {
        ModelKind::Logistic => Hyperparameters::Logistic,
        ModelKind::Forest => Hyperparameters::Forest {
            n_trees: get("n_trees")? as usize,
            min_leaf: get("min_leaf")? as usize,
            max_features: None,
        },
        ModelKind::Boost => Hyperparameters::Boost {
            n_rounds: get("n_rounds")? as usize,
            max_depth: get("max_depth")? as usize,
        },
        ModelKind::Svm => Hyperparameters::Svm {
            c: get("c")?,
            gamma: get("gamma")?,
            tol: 1e-3,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: BTreeMap<String, f64>,
    /// The objective, or the penalty substituted for a non-finite value.
    pub objective: f64,
    pub penalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_point: BTreeMap<String, f64>,
    pub best_objective: f64,
    pub history: Vec<Evaluation>,
}

const PRIMES: [u32; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Halton points with a random Cranley-Patterson shift.
fn initial_design<R: Rng>(count: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..d)
                .map(|k| (radical_inverse(i, PRIMES[k % PRIMES.len()]) + shift[k]).fract())
                .collect()
        })
        .collect()
}

/// Penalty for non-finite evaluations: above every finite value seen.
fn penalty(finite: &[f64]) -> f64 {
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    max + (max - min).max(1.0)
}

/// Minimises `objective` with `budget` evaluations.
pub fn bayes_optimize<O>(mut objective: O, space: &SearchSpace, budget: usize, seed: u64) -> Result<TuneResult>
where
    O: FnMut(&BTreeMap<String, f64>) -> f64,
{
    let d = space.dim();
    if budget < d + 2 {
        return Err(Error::InvalidInput(format!(
            "budget {budget} below dimensions + 2 = {}",
            d + 2
        )));
    }
    let mut rng = seed::rng(seed);
    let n_init = (5usize).max(d + 1).min(budget);
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut raw: Vec<f64> = Vec::with_capacity(budget);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(budget);

    let mut evaluate = |u: Vec<f64>, units: &mut Vec<Vec<f64>>, raw: &mut Vec<f64>, points: &mut Vec<Vec<f64>>| {
        let values = space.point(&u);
        let y = objective(&space.named(&values));
        // the surrogate sees where the (rounded) point actually landed
        units.push(space.dimensions.iter().zip(&values).map(|(dim, &v)| dim.to_unit(v)).collect());
        raw.push(y);
        points.push(values);
    };

    for u in initial_design(n_init, d, &mut rng) {
        evaluate(u, &mut units, &mut raw, &mut points);
    }
    while raw.len() < budget {
        let finite: Vec<f64> = raw.iter().copied().filter(|v| v.is_finite()).collect();
        let next = if finite.is_empty() {
            (0..d).map(|_| rng.random::<f64>()).collect()
        } else {
            let pen = penalty(&finite);
            let ys: Vec<f64> = raw.iter().map(|&v| if v.is_finite() { v } else { pen }).collect();
            propose(&units, &ys, &mut rng)
        };
        evaluate(next, &mut units, &mut raw, &mut points);
    }

    let finite: Vec<f64> = raw.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::AllNonFinite);
    }
    let pen = penalty(&finite);
    let history: Vec<Evaluation> = points
        .iter()
        .zip(&raw)
        .map(|(p, &y)| Evaluation {
            point: space.named(p),
            objective: if y.is_finite() { y } else { pen },
            penalized: !y.is_finite(),
        })
        .collect();
    let best = history
        .iter()
        .filter(|e| !e.penalized)
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("at least one finite evaluation");
    Ok(TuneResult {
        best_point: best.point.clone(),
        best_objective: best.objective,
        history,
    })
}

/// Expected-improvement maximiser over random candidates plus local
/// Nelder-Mead refinement of the best few.
fn propose<R: Rng>(units: &[Vec<f64>], ys: &[f64], rng: &mut R) -> Vec<f64> {
    let d = units[0].len();
    let candidates: Vec<Vec<f64>> = (0..CANDIDATES).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let Some(gp) = GaussianProcess::fit(units, ys, rng) else {
        // constant objective: nothing to model
        return candidates.into_iter().next().expect("candidates");
    };
    let best_y = gp.best_standardized();
    let mut scored: Vec<(f64, Vec<f64>)> = candidates
        .into_iter()
        .map(|u| {
            let (m, s) = gp.predict(&u);
            (expected_improvement(m, s, best_y), u)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].clone();
    for (_, start) in scored.iter().take(REFINE_STARTS) {
        let ei = |u: &[f64]| {
            let c: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let (m, s) = gp.predict(&c);
            -expected_improvement(m, s, best_y)
        };
        if let Some((u, neg)) = gp::nelder_mead(ei, start, 0.05, 60) {
            let u: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            if -neg > best.0 {
                best = (-neg, u);
            }
        }
    }
    best.1
}
