//! Random forests: bootstrap-aggregated CART trees with random feature
//! subsets, out-of-bag error and OOB permutation importance.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{BinnedMatrix, Entry, Tree, TreeParams};
use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `⌈√k⌉`.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            max_features: None,
            min_leaf: 1,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ForestModel<F> {
    pub trees: Vec<Tree<F>>,
    pub oob_error: f64,
    pub bootstrap_seeds: Vec<u64>,
    pub n_train: usize,
    pub n_features: usize,
    pub params: ForestParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub scores: Vec<f64>,
}

/// Bootstrap draw counts for one tree; regenerated from its seed for OOB work.
pub fn bootstrap_counts(tree_seed: u64, n: usize) -> Vec<u32> {
    let mut rng = seed::rng(tree_seed);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

pub(crate) fn check_labels(n: usize, y: &[Label]) -> Result<()> {
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let pd = y.iter().filter(|l| l.is_pd()).count();
    if pd == 0 || pd == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub(crate) fn check_finite<F: Scalar>(x: ArrayView2<F>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entry in design matrix".into()));
    }
    Ok(())
}

pub fn fit_random_forest<F: Scalar>(x: ArrayView2<F>, y: &[Label], params: &ForestParams) -> Result<ForestModel<F>> {
    let (n, p) = x.dim();
    check_labels(n, y)?;
    check_finite(x)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidInput("n_trees must be at least 1".into()));
    }
    let data = BinnedMatrix::new(x);
    let mtry = params
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    let tree_params = TreeParams {
        max_depth: None,
        min_leaf: params.min_leaf.max(1),
        max_features: Some(mtry),
    };
    let seeds: Vec<u64> = (0..params.n_trees as u64).map(|t| seed::derive(params.seed, t)).collect();

    let grown: Vec<(Tree<F>, Vec<u32>)> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = seed::rng(s);
            let mut counts = vec![0u32; n];
            let mut entries = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                counts[i] += 1;
                entries.push(Entry { row: i as u32, weight: F::one() });
            }
            let tree = Tree::fit(&data, y, entries, &tree_params, &mut rng);
            (tree, counts)
        })
        .collect();

    // OOB majority vote, ties to PD.
    let mut votes_pd = vec![0u32; n];
    let mut votes_all = vec![0u32; n];
    let mut row = vec![F::zero(); p];
    for (tree, counts) in &grown {
        for i in 0..n {
            if counts[i] == 0 {
                row.iter_mut().zip(x.row(i)).for_each(|(r, &v)| *r = v);
                votes_all[i] += 1;
                if tree.predict(&row).is_pd() {
                    votes_pd[i] += 1;
                }
            }
        }
    }
    let (mut wrong, mut seen) = (0usize, 0usize);
    for i in 0..n {
        if votes_all[i] > 0 {
            seen += 1;
            let pred = 2 * votes_pd[i] >= votes_all[i];
            if pred != y[i].is_pd() {
                wrong += 1;
            }
        }
    }
    let oob_error = if seen == 0 { 0.0 } else { wrong as f64 / seen as f64 };

    Ok(ForestModel {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        oob_error,
        bootstrap_seeds: seeds,
        n_train: n,
        n_features: p,
        params: *params,
    })
}

impl<F: Scalar> ForestModel<F> {
    /// Fraction of trees voting PD.
    pub fn vote_fraction(&self, x: &[F]) -> Result<F> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let pd = self.trees.iter().filter(|t| t.predict(x).is_pd()).count();
        Ok(F::lit(pd as f64 / self.trees.len() as f64))
    }

    /// Rows left out of tree `t`'s bootstrap sample.
    pub fn oob_rows(&self, t: usize) -> Vec<usize> {
        bootstrap_counts(self.bootstrap_seeds[t], self.n_train)
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// OOB permutation importance: per tree, the rise in OOB error after
/// permuting one column among that tree's OOB rows; the score is the mean
/// rise divided by its standard deviation across trees.
pub fn permutation_importance<F: Scalar>(
    forest: &ForestModel<F>,
    x: ArrayView2<F>,
    y: &[Label],
    seed: u64,
) -> Result<ImportanceScores> {
    let (n, p) = x.dim();
    if n != forest.n_train || p != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_train * forest.n_features,
            got: n * p,
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }

    // diffs[t][j]
    let diffs: Vec<Option<Vec<f64>>> = (0..forest.trees.len())
        .into_par_iter()
        .map(|t| {
            let tree = &forest.trees[t];
            let oob = forest.oob_rows(t);
            if oob.is_empty() {
                return None;
            }
            let rows: Vec<Vec<F>> = oob.iter().map(|&i| x.row(i).to_vec()).collect();
            let base = rows
                .iter()
                .zip(&oob)
                .filter(|(r, &i)| tree.predict(r) != y[i])
                .count();
            let mut out = Vec::with_capacity(p);
            let mut buf = vec![F::zero(); p];
            for j in 0..p {
                let mut rng = seed::rng(seed::derive_path(seed, &[t as u64, j as u64]));
                let mut perm: Vec<usize> = (0..oob.len()).collect();
                perm.shuffle(&mut rng);
                let mut wrong = 0usize;
                for (k, r) in rows.iter().enumerate() {
                    buf.copy_from_slice(r);
                    buf[j] = rows[perm[k]][j];
                    if tree.predict(&buf) != y[oob[k]] {
                        wrong += 1;
                    }
                }
                out.push((wrong as f64 - base as f64) / oob.len() as f64);
            }
            Some(out)
        })
        .collect();

    let per_tree: Vec<&Vec<f64>> = diffs.iter().flatten().collect();
    let m = per_tree.len();
    let scores = (0..p)
        .map(|j| {
            if m < 2 {
                return 0.0;
            }
            let mean = per_tree.iter().map(|d| d[j]).sum::<f64>() / m as f64;
            let var = per_tree.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            let sd = var.sqrt();
            if sd > 0.0 {
                mean / sd
            } else {
                0.0
            }
        })
        .collect();
    Ok(ImportanceScores { scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn planted(n: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, 4), |_| rng.random::<f64>());
        let y = x.rows().into_iter().map(|r| Label::from_pd(r[2] > 0.5)).collect();
        (x, y)
    }

    #[test]
    fn oob_fraction_near_one_over_e() {
        let n = 1000;
        let fr: f64 = (0..200)
            .map(|t| bootstrap_counts(seed::derive(1, t), n).iter().filter(|&&c| c == 0).count() as f64 / n as f64)
            .sum::<f64>()
            / 200.0;
        assert!((0.35..=0.39).contains(&fr), "{fr}");
    }

    #[test]
    fn separable_data() {
        let (x, y) = planted(300, 2);
        let f = fit_random_forest(x.view(), &y, &ForestParams::new(100, 3)).unwrap();
        let acc = (0..300)
            .filter(|&i| (f.vote_fraction(&x.row(i).to_vec()).unwrap() >= 0.5) == y[i].is_pd())
            .count();
        assert_eq!(acc, 300);
        assert!(f.oob_error < 0.05, "{}", f.oob_error);
        for t in &f.trees {
            for (j, thr) in t.splits() {
                let col = x.column(j);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(lo <= thr && thr <= hi);
            }
        }
    }

    #[test]
    fn bit_reproducible() {
        let (x, y) = planted(200, 4);
        let a = fit_random_forest(x.view(), &y, &ForestParams::new(20, 9)).unwrap();
        let b = fit_random_forest(x.view(), &y, &ForestParams::new(20, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn importance_finds_planted_feature() {
        let (x, y) = planted(300, 5);
        let f = fit_random_forest(x.view(), &y, &ForestParams::new(100, 6)).unwrap();
        let imp = permutation_importance(&f, x.view(), &y, 7).unwrap();
        let best = (0..4).max_by(|&a, &b| imp.scores[a].total_cmp(&imp.scores[b])).unwrap();
        assert_eq!(best, 2);
        assert!(imp.scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn single_tree_oob_counts() {
        let (x, y) = planted(50, 8);
        let f = fit_random_forest(x.view(), &y, &ForestParams::new(1, 1)).unwrap();
        assert!(!f.oob_rows(0).is_empty());
        assert!((0.0..=1.0).contains(&f.oob_error));
    }

    #[test]
    fn all_pd_votes_score_one() {
        let (x, y) = planted(100, 10);
        let f = fit_random_forest(x.view(), &y, &ForestParams::new(30, 1)).unwrap();
        let s = f.vote_fraction(&[0.5, 0.5, 2.0, 0.5]).unwrap();
        assert_eq!(s, 1.0);
    }
}
