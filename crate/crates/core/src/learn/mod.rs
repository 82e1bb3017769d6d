//! The four classifiers, permutation importance, goodness-of-fit
//! diagnostics and the serialized model artifact.

pub mod artifact;
pub mod boost;
pub mod forest;
pub mod logistic;
pub mod svm;
pub mod tree;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use artifact::{data_fingerprint, ArtifactScore, Contribution, ModelArtifact, TrainingMetadata, PAPER_EQ1_ID, SCHEMA_VERSION};
pub use boost::{fit_boosted, fit_boosted_traced, BoostModel, BoostParams, BoostTrace};
pub use forest::{bootstrap_counts, fit_random_forest, permutation_importance, ForestModel, ForestParams, ImportanceScores};
pub use logistic::{
    diagnostics_from_log_likelihoods, fit_logistic, goodness_of_fit, logistic_score, null_intercept, FitDiagnostics,
    LogisticModel, LogisticScore, PAPER_EQ1_COEFFICIENTS, PAPER_EQ1_INTERCEPT,
};
pub use svm::{fit_svm, solve_svm, SvmModel, SvmParams, SvmSolution};
pub use tree::{Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Forest,
    Boost,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Logistic, ModelKind::Forest, ModelKind::Boost, ModelKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
            ModelKind::Boost => "boost",
            ModelKind::Svm => "svm",
        }
    }

    /// Decision threshold on the score: 0.5 for probability-scaled models,
    /// 0 for SVM decision values.
    pub fn threshold(self) -> f64 {
        match self {
            ModelKind::Svm => 0.0,
            _ => 0.5,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "forest" => Ok(ModelKind::Forest),
            "boost" => Ok(ModelKind::Boost),
            "svm" => Ok(ModelKind::Svm),
            other => Err(Error::InvalidInput(format!("unknown model {other:?}"))),
        }
    }
}

/// Hyperparameters of one model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "lowercase")]
pub enum Hyperparameters {
    Logistic,
    Forest {
        n_trees: usize,
        min_leaf: usize,
        max_features: Option<usize>,
    },
    Boost {
        n_rounds: usize,
        max_depth: usize,
    },
    Svm {
        c: f64,
        gamma: f64,
        tol: f64,
    },
}

impl Hyperparameters {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparameters::Logistic => ModelKind::Logistic,
            Hyperparameters::Forest { .. } => ModelKind::Forest,
            Hyperparameters::Boost { .. } => ModelKind::Boost,
            Hyperparameters::Svm { .. } => ModelKind::Svm,
        }
    }

    /// Untuned defaults.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logistic => Hyperparameters::Logistic,
            ModelKind::Forest => Hyperparameters::Forest {
                n_trees: 100,
                min_leaf: 1,
                max_features: None,
            },
            ModelKind::Boost => Hyperparameters::Boost {
                n_rounds: 100,
                max_depth: 2,
            },
            ModelKind::Svm => Hyperparameters::Svm {
                c: 1.0,
                gamma: 0.1,
                tol: 1e-3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", content = "model", rename_all = "lowercase", bound = "F: Scalar")]
pub enum Model<F> {
    Logistic(LogisticModel<F>),
    Forest(ForestModel<F>),
    Boost(BoostModel<F>),
    Svm(SvmModel<F>),
}

pub fn fit_model<F: Scalar>(hp: &Hyperparameters, x: ArrayView2<F>, y: &[Label], seed: u64) -> Result<Model<F>> {
    Ok(match *hp {
        Hyperparameters::Logistic => Model::Logistic(fit_logistic(x, y)?),
        Hyperparameters::Forest {
            n_trees,
            min_leaf,
            max_features,
        } => Model::Forest(fit_random_forest(
            x,
            y,
            &ForestParams {
                n_trees,
                max_features,
                min_leaf,
                seed,
            },
        )?),
        Hyperparameters::Boost { n_rounds, max_depth } => Model::Boost(fit_boosted(
            x,
            y,
            &BoostParams {
                n_rounds,
                max_depth,
                seed,
            },
        )?),
        Hyperparameters::Svm { c, gamma, tol } => Model::Svm(fit_svm(x, y, &SvmParams { c, gamma, tol, seed })?),
    })
}

impl<F: Scalar> Model<F> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::Forest(_) => ModelKind::Forest,
            Model::Boost(_) => ModelKind::Boost,
            Model::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Logistic(m) => m.n_features(),
            Model::Forest(m) => m.n_features,
            Model::Boost(m) => m.n_features,
            Model::Svm(m) => m.n_features(),
        }
    }

    /// Monotone PD-risk score: probability, vote fraction, squashed
    /// boosting margin, or SVM decision value.
    pub fn predict_score(&self, x: &[F]) -> Result<F> {
        match self {
            Model::Logistic(m) => m.probability(x),
            Model::Forest(m) => m.vote_fraction(x),
            Model::Boost(m) => m.score(x),
            Model::Svm(m) => m.decision(x),
        }
    }

    pub fn threshold(&self) -> F {
        F::lit(self.kind().threshold())
    }

    pub fn predict(&self, x: &[F]) -> Result<Label> {
        Ok(Label::from_pd(self.predict_score(x)? >= self.threshold()))
    }

    pub fn predict_scores(&self, x: ArrayView2<F>) -> Result<Vec<F>> {
        x.rows().into_iter().map(|r| self.predict_score(&r.to_vec())).collect()
    }
}
