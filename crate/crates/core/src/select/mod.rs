//! Feature selection fitted on training data only: rank-sum filtering,
//! cross-validated LASSO and principal components.

mod lasso;
mod pca;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{wilcoxon_rank_sum, TestResult, WilcoxonMode};

pub use lasso::{
    lambda_max, lasso_fit, lasso_grid, lasso_select, LassoConfig, LassoFit, LassoSelection, Standardizer,
};
pub use pca::{pca_apply, pca_fit, PcaTransform};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    selected: Vec<usize>,
    n_features: usize,
}

impl FeatureMask {
    pub fn new(mut selected: Vec<usize>, n_features: usize) -> Result<Self> {
        selected.sort_unstable();
        selected.dedup();
        if selected.is_empty() {
            return Err(Error::NoFeaturesSelected);
        }
        if let Some(&bad) = selected.iter().find(|&&j| j >= n_features) {
            return Err(Error::InvalidInput(format!(
                "feature index {bad} out of range for {n_features} features"
            )));
        }
        Ok(FeatureMask { selected, n_features })
    }

    pub fn all(n_features: usize) -> Self {
        FeatureMask {
            selected: (0..n_features).collect(),
            n_features,
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn contains(&self, j: usize) -> bool {
        self.selected.binary_search(&j).is_ok()
    }

    pub fn apply<F: Scalar>(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(x.select(Axis(1), &self.selected))
    }

    pub fn apply_row<F: Scalar>(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.selected.iter().map(|&j| x[j]).collect())
    }
}

/// A fitted selector: a subset of columns or a PCA projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "F: Scalar")]
pub enum Selector<F> {
    Mask(FeatureMask),
    Pca(PcaTransform<F>),
}

impl<F: Scalar> Selector<F> {
    pub fn input_dim(&self) -> usize {
        match self {
            Selector::Mask(m) => m.n_features(),
            Selector::Pca(p) => p.mean.len(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Selector::Mask(m) => m.selected().len(),
            Selector::Pca(p) => p.components.len(),
        }
    }

    pub fn apply(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        match self {
            Selector::Mask(m) => m.apply(x),
            Selector::Pca(p) => p.apply(x),
        }
    }

    pub fn apply_row(&self, x: &[F]) -> Result<Vec<F>> {
        match self {
            Selector::Mask(m) => m.apply_row(x),
            Selector::Pca(p) => pca_apply(p, x),
        }
    }

    /// Names of the transformed columns.
    pub fn output_names(&self, input_names: &[&str]) -> Vec<String> {
        match self {
            Selector::Mask(m) => m.selected().iter().map(|&j| input_names[j].to_string()).collect(),
            Selector::Pca(p) => (1..=p.components.len()).map(|c| format!("PC{c}")).collect(),
        }
    }
}

/// Rank-sum test of every column between the classes.
pub fn rank_sum_tests<F: Scalar>(x: ArrayView2<F>, y: &[Label]) -> Result<Vec<TestResult>> {
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
    x.columns()
        .into_iter()
        .map(|col| {
            let (mut pd, mut normal) = (Vec::new(), Vec::new());
            for (&v, l) in col.iter().zip(y) {
                if l.is_pd() {
                    pd.push(v.to_f64_lossy());
                } else {
                    normal.push(v.to_f64_lossy());
                }
            }
            wilcoxon_rank_sum(&pd, &normal, WilcoxonMode::default())
        })
        .collect()
}

/// Keeps every column whose two-sided rank-sum p-value is below `alpha`
/// (all columns when `alpha >= 1`).
pub fn wilcoxon_filter<F: Scalar>(x: ArrayView2<F>, y: &[Label], alpha: f64) -> Result<FeatureMask> {
    let tests = rank_sum_tests(x, y)?;
    let keep = tests
        .iter()
        .enumerate()
        .filter(|(_, t)| alpha >= 1.0 || t.p_value < alpha)
        .map(|(j, _)| j)
        .collect();
    FeatureMask::new(keep, x.ncols())
}
