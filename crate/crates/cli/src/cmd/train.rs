use std::path::PathBuf;

use serde_json::{json, Value};

use pqscreen::cohort::FEATURE_NAMES;
use pqscreen::eval::{fit_selector, subject_groups, tune_model, CvConfig, Scheme, SelectorKind};
use pqscreen::learn::{
    data_fingerprint, fit_model, goodness_of_fit, Hyperparameters, Model, ModelArtifact, ModelKind, TrainingMetadata,
};
use pqscreen::seed::{self, stream};

use crate::error::CliError;
use crate::output::say;
use crate::output::{load_cohort, path_string, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Cohort CSV.
    #[arg(long)]
    data: PathBuf,
    /// logistic, forest, boost or svm.
    #[arg(long)]
    model: ModelKind,
    /// none, wilcoxon, lasso or pca.
    #[arg(long, default_value = "none")]
    selector: String,
    #[arg(long)]
    seed: u64,
    /// Tune hyperparameters with this many evaluations instead of using flags.
    #[arg(long)]
    tune_budget: Option<usize>,
    #[arg(long, default_value_t = 10)]
    inner_k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.99)]
    pca_threshold: f64,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    n_rounds: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Artifact identifier [default: <model>-<selector>-seed<seed>].
    #[arg(long)]
    id: Option<String>,
    /// Artifact JSON to write.
    #[arg(long)]
    out: PathBuf,
}

fn flag_hyperparameters(a: &Args) -> Hyperparameters {
    let mut hp = Hyperparameters::default_for(a.model);
    match &mut hp {
        Hyperparameters::Logistic => {}
        Hyperparameters::Forest { n_trees, min_leaf, .. } => {
            *n_trees = a.n_trees.unwrap_or(*n_trees);
            *min_leaf = a.min_leaf.unwrap_or(*min_leaf);
        }
        Hyperparameters::Boost { n_rounds, max_depth } => {
            *n_rounds = a.n_rounds.unwrap_or(*n_rounds);
            *max_depth = a.max_depth.unwrap_or(*max_depth);
        }
        Hyperparameters::Svm { c, gamma, .. } => {
            *c = a.c.unwrap_or(*c);
            *gamma = a.gamma.unwrap_or(*gamma);
        }
    }
    hp
}

pub fn run(a: Args) -> Result<(), CliError> {
    let selector_kind: Option<SelectorKind> = match a.selector.as_str() {
        "none" => None,
        s => Some(s.parse().map_err(|e: pqscreen::Error| CliError::Usage(e.to_string()))?),
    };
    let cohort = load_cohort(&a.data)?;
    let x = cohort.design_matrix::<f64>();
    let y = cohort.labels();
    let groups = subject_groups(&cohort);

    let mut cv_config = CvConfig::new(Scheme::SubjectWise, selector_kind.unwrap_or(SelectorKind::Wilcoxon), a.model, a.seed);
    cv_config.inner_k = a.inner_k;
    cv_config.alpha = a.alpha;
    cv_config.pca_threshold = a.pca_threshold;
    let selector = match selector_kind {
        Some(kind) => Some(fit_selector(
            kind,
            x.view(),
            &y,
            Some(&groups),
            &cv_config,
            seed::derive(a.seed, stream::SELECTOR),
        )?),
        None => None,
    };
    let z = match &selector {
        Some(s) => s.apply(x.view())?,
        None => x.clone(),
    };
    let model_seed = seed::derive(a.seed, stream::MODEL);
    let (hp, tuning) = match a.tune_budget {
        Some(budget) => tune_model(
            a.model,
            z.view(),
            &y,
            Some(&groups),
            budget,
            a.inner_k,
            seed::derive(a.seed, stream::TUNE),
            model_seed,
        )?,
        None => (flag_hyperparameters(&a), None),
    };
    let model = fit_model(&hp, z.view(), &y, model_seed)?;

    let mut summary = serde_json::Map::new();
    match &model {
        Model::Logistic(m) => {
            let d = goodness_of_fit(m, z.view(), &y)?;
            summary.insert("goodness_of_fit".into(), serde_json::to_value(d)?);
            if m.separation_warning {
                log::warn!("quasi-separation detected; coefficients may be unstable");
            }
        }
        Model::Forest(f) => {
            summary.insert("oob_error".into(), f.oob_error.into());
        }
        Model::Boost(b) => {
            summary.insert("rounds".into(), b.weak_learners.len().into());
        }
        Model::Svm(s) => {
            summary.insert("support_vectors".into(), s.support_vectors.len().into());
        }
    }

    let selector_name = selector_kind.map_or("none", |s| s.name());
    let id = a
        .id
        .clone()
        .unwrap_or_else(|| format!("{}-{}-seed{}", a.model, selector_name, a.seed));
    let mut run = RunConfig::new("train")
        .param("inner_k", a.inner_k)
        .param("alpha", a.alpha)
        .param("pca_threshold", a.pca_threshold)
        .param("hyperparameters", hp);
    run.inputs = vec![path_string(&a.data)];
    run.outputs = vec![path_string(&a.out)];
    run.selector = Some(selector_name.into());
    run.model = Some(a.model.name().into());
    run.seed = Some(a.seed);
    run.tune_budget = a.tune_budget;
    run.threshold = Some(a.model.threshold());

    let data_path = std::fs::canonicalize(&a.data).unwrap_or_else(|_| a.data.clone());
    let artifact = ModelArtifact::new(
        id,
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        selector,
        model,
        Some(TrainingMetadata {
            seed: a.seed,
            selector: selector_name.into(),
            hyperparameters: hp,
            data_fingerprint: data_fingerprint(&cohort)?,
            data_path: Some(path_string(&data_path)),
            n_observations: cohort.len(),
            run_config: Some(run.to_value()),
        }),
    )?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| crate::output::io_error(dir, e))?;
    }
    artifact.save(&a.out)?;
    let out = json!({
        "model_id": artifact.model_id,
        "artifact": path_string(&a.out),
        "hyperparameters": hp,
        "tuning_best_objective": tuning.map(|t| t.best_objective),
        "model_inputs": artifact.model_input_names(),
        "summary": Value::Object(summary),
        "toolkit_version": pqscreen::VERSION,
    });
    say!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
