use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column {0}")]
    MissingColumn(String),

    #[error("row {row}, column {column}: {message}")]
    InvalidValue {
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate observation for subject {subject} visit {visit}")]
    DuplicateObservation { subject: String, visit: u32 },

    #[error("subject {0} has conflicting labels")]
    ConflictingLabels(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("class {0} absent")]
    ClassAbsent(&'static str),

    #[error("single-class labels; both Normal and EarlyPD are required")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("infeasible moments for {feature}: {message}")]
    InfeasibleMoments { feature: String, message: String },

    #[error("no discriminative features selected")]
    NoFeaturesSelected,

    #[error("singular design matrix")]
    Singular,

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("boosting produced an empty ensemble (first weak learner error {0} >= 0.5)")]
    EmptyEnsemble(f64),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("fold plan: {0}")]
    FoldPlan(String),

    #[error("fold {fold} of repetition {repetition}: {message}")]
    Fold {
        repetition: usize,
        fold: usize,
        message: String,
    },

    #[error("all objective evaluations were non-finite")]
    AllNonFinite,

    #[error("artifact: {0}")]
    Artifact(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short stable identifier, used for machine-parsable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::MissingColumn(_) => "missing_column",
            Error::InvalidValue { .. } => "invalid_value",
            Error::DuplicateObservation { .. } => "duplicate_observation",
            Error::ConflictingLabels(_) => "conflicting_labels",
            Error::InvalidInput(_) => "invalid_input",
            Error::ClassAbsent(_) => "class_absent",
            Error::SingleClass => "single_class",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InfeasibleMoments { .. } => "infeasible_moments",
            Error::NoFeaturesSelected => "no_features_selected",
            Error::Singular => "singular",
            Error::NonConvergence(_) => "non_convergence",
            Error::EmptyEnsemble(_) => "empty_ensemble",
            Error::Degenerate(_) => "degenerate",
            Error::FoldPlan(_) => "fold_plan",
            Error::Fold { .. } => "fold",
            Error::AllNonFinite => "all_non_finite",
            Error::Artifact(_) => "artifact",
        }
    }
}
