//! Model artifact JSON: a fitted selector and model over the canonical
//! features, with training metadata. The published model is built in.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Hyperparameters, LogisticModel, Model};
use crate::cohort::{write_cohort_to, Cohort, FeatureVector, Label, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::scalar::sigmoid;
use crate::select::Selector;

pub const SCHEMA_VERSION: u32 = 1;
pub const PAPER_EQ1_ID: &str = "paper-eq1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub selector: String,
    pub hyperparameters: Hyperparameters,
    /// SHA-256 of the training cohort in canonical CSV form.
    pub data_fingerprint: String,
    #[serde(default)]
    pub data_path: Option<String>,
    pub n_observations: usize,
    /// Resolved command configuration that produced the artifact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub model_id: String,
    pub toolkit_version: String,
    /// Input features, in the order scoring vectors are given.
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub selector: Option<Selector<f64>>,
    #[serde(flatten)]
    pub model: Model<f64>,
    #[serde(default)]
    pub training: Option<TrainingMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub value: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactScore {
    /// Probability for logistic models; vote fraction, squashed margin or
    /// logistic of the decision value for the others.
    pub probability: f64,
    /// The model's native score.
    pub score: f64,
    /// `f(x)` for logistic models.
    pub linear_score: Option<f64>,
    pub intercept: Option<f64>,
    /// Per-input contributions; empty for non-linear models.
    pub contributions: Vec<Contribution>,
    pub predicted: Label,
}

pub fn data_fingerprint(cohort: &Cohort) -> Result<String> {
    let mut buf = Vec::new();
    write_cohort_to(cohort, &mut buf)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

impl ModelArtifact {
    pub fn new(
        model_id: impl Into<String>,
        feature_names: Vec<String>,
        selector: Option<Selector<f64>>,
        model: Model<f64>,
        training: Option<TrainingMetadata>,
    ) -> Result<Self> {
        let a = ModelArtifact {
            schema_version: SCHEMA_VERSION,
            model_id: model_id.into(),
            toolkit_version: crate::VERSION.to_string(),
            feature_names,
            selector,
            model,
            training,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn paper_eq1() -> Self {
        ModelArtifact {
            schema_version: SCHEMA_VERSION,
            model_id: PAPER_EQ1_ID.to_string(),
            toolkit_version: crate::VERSION.to_string(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            selector: None,
            model: Model::Logistic(LogisticModel::paper_eq1()),
            training: None,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        (name == PAPER_EQ1_ID).then(Self::paper_eq1)
    }

    /// A built-in name or a path to an artifact file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::builtin(name_or_path) {
            Some(a) => Ok(a),
            None => Self::load(name_or_path),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Artifact(format!(
                    "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(Error::Artifact("missing schema_version".into())),
        }
        let a: ModelArtifact = serde_json::from_value(value).map_err(|e| Error::Artifact(e.to_string()))?;
        a.validate()?;
        Ok(a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()? + "\n").map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn validate(&self) -> Result<()> {
        let n_in = self.feature_names.len();
        let model_dim = match &self.selector {
            Some(s) => {
                if s.input_dim() != n_in {
                    return Err(Error::Artifact(format!(
                        "selector expects {} inputs but artifact lists {n_in} features",
                        s.input_dim()
                    )));
                }
                s.output_dim()
            }
            None => n_in,
        };
        if self.model.n_features() != model_dim {
            return Err(Error::Artifact(format!(
                "model expects {} inputs, selector provides {model_dim}",
                self.model.n_features()
            )));
        }
        if let Model::Logistic(m) = &self.model {
            if m.coefficients.iter().any(|c| !c.is_finite()) || !m.intercept.is_finite() {
                return Err(Error::Artifact("non-finite logistic coefficient".into()));
            }
        }
        Ok(())
    }

    /// Names of the model's inputs after selection.
    pub fn model_input_names(&self) -> Vec<String> {
        match &self.selector {
            Some(s) => {
                let names: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
                s.output_names(&names)
            }
            None => self.feature_names.clone(),
        }
    }

    pub fn score_features(&self, features: &FeatureVector) -> Result<ArtifactScore> {
        self.score_values(&features.to_values::<f64>())
    }

    pub fn score_values(&self, x: &[f64]) -> Result<ArtifactScore> {
        if x.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        let z = match &self.selector {
            Some(s) => s.apply_row(x)?,
            None => x.to_vec(),
        };
        let score = self.model.predict_score(&z)?;
        let predicted = Label::from_pd(score >= self.model.threshold());
        Ok(match &self.model {
            Model::Logistic(m) => {
                let s = super::logistic_score(m, &z)?;
                let contributions = self
                    .model_input_names()
                    .into_iter()
                    .zip(z.iter().zip(&s.contributions))
                    .map(|(feature, (&value, &contribution))| Contribution {
                        feature,
                        value,
                        contribution,
                    })
                    .collect();
                ArtifactScore {
                    probability: s.probability,
                    score,
                    linear_score: Some(s.linear_score),
                    intercept: Some(m.intercept),
                    contributions,
                    predicted,
                }
            }
            Model::Svm(_) => ArtifactScore {
                probability: sigmoid(score),
                score,
                linear_score: None,
                intercept: None,
                contributions: Vec::new(),
                predicted,
            },
            _ => ArtifactScore {
                probability: score,
                score,
                linear_score: None,
                intercept: None,
                contributions: Vec::new(),
                predicted,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_round_trip() {
        let a = ModelArtifact::paper_eq1();
        let back = ModelArtifact::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
        let json: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(json["model_type"], "logistic");
        assert_eq!(json["model"]["intercept"], 0.54813);
    }

    #[test]
    fn scores_and_contributions() {
        let a = ModelArtifact::paper_eq1();
        let s = a.score_values(&[0.0; 22]).unwrap();
        assert!((s.linear_score.unwrap() - 0.54813).abs() < 1e-12);
        assert_eq!(s.contributions.len(), 22);
        assert_eq!(s.predicted, Label::EarlyPd);
        assert!(a.score_values(&[0.0; 21]).is_err());
    }

    #[test]
    fn schema_mismatch_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&ModelArtifact::paper_eq1().to_json().unwrap()).unwrap();
        v["schema_version"] = 99.into();
        assert!(matches!(ModelArtifact::from_json(&v.to_string()), Err(Error::Artifact(_))));
        v["schema_version"] = 1.into();
        v["feature_names"] = serde_json::json!(["a"]);
        assert!(matches!(ModelArtifact::from_json(&v.to_string()), Err(Error::Artifact(_))));
    }
}
