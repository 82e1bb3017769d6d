//! Repeated nested cross-validation: selector fitting, hyperparameter
//! tuning and model fitting all happen on the outer training folds.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_fold_plan, stratified_assignment, subject_groups, FoldPlan, Scheme};
use super::metrics::{confusion_metrics, roc_auc};
use crate::cohort::{Cohort, Label};
use crate::error::{Error, Result};
use crate::learn::{fit_model, fit_random_forest, ForestParams, Hyperparameters, ModelKind};
use crate::scalar::Scalar;
use crate::seed::{self, stream};
use crate::select::{lasso_select, pca_fit, wilcoxon_filter, LassoConfig, Selector};
use crate::stats::{ci95, mean};
use crate::tune::{bayes_optimize, hyperparameters_from_point, SearchSpace, TuneResult, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Wilcoxon,
    Lasso,
    Pca,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 3] = [SelectorKind::Wilcoxon, SelectorKind::Lasso, SelectorKind::Pca];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Wilcoxon => "wilcoxon",
            SelectorKind::Lasso => "lasso",
            SelectorKind::Pca => "pca",
        }
    }
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SelectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wilcoxon" => Ok(SelectorKind::Wilcoxon),
            "lasso" => Ok(SelectorKind::Lasso),
            "pca" => Ok(SelectorKind::Pca),
            other => Err(Error::InvalidInput(format!("unknown selector {other:?}"))),
        }
    }
}

/// What the confidence intervals are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiUnit {
    /// Every (repetition, fold) record.
    Record,
    /// The per-repetition means.
    Repetition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub scheme: Scheme,
    pub selector: SelectorKind,
    pub model: ModelKind,
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub tune_budget: usize,
    pub inner_k: usize,
    pub alpha: f64,
    pub pca_threshold: f64,
    pub ci_unit: CiUnit,
}

impl CvConfig {
    pub fn new(scheme: Scheme, selector: SelectorKind, model: ModelKind, seed: u64) -> Self {
        CvConfig {
            scheme,
            selector,
            model,
            k: 10,
            repetitions: 10,
            seed,
            tune_budget: DEFAULT_BUDGET,
            inner_k: 10,
            alpha: 0.05,
            pca_threshold: 0.99,
            ci_unit: CiUnit::Record,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub repetition: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub n_test: usize,
    /// Canonical indices kept by a mask selector; PCA reports none.
    pub selected_features: Vec<usize>,
    pub n_model_inputs: usize,
    pub hyperparameters: Hyperparameters,
    pub tune_best_objective: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Sensitivity,
    Specificity,
    Auc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Sensitivity, Metric::Specificity, Metric::Auc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::Auc => "auc",
        }
    }

    pub fn of(self, r: &MetricRecord) -> f64 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::Sensitivity => r.sensitivity,
            Metric::Specificity => r.specificity,
            Metric::Auc => r.auc,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misclassified {
    pub repetition: usize,
    pub fold: usize,
    pub subject_id: String,
    pub visit: u32,
    pub label: Label,
    pub predicted: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: CvConfig,
    pub toolkit_version: String,
    pub records: Vec<MetricRecord>,
    pub aggregates: BTreeMap<Metric, Aggregate>,
    pub misclassified: Vec<Misclassified>,
    pub tuning: Vec<TuneResult>,
}

impl CvReport {
    /// Mean and 95% CI of every metric, over records or repetition means.
    pub fn compute_aggregates(records: &[MetricRecord], unit: CiUnit) -> Result<BTreeMap<Metric, Aggregate>> {
        let mut out = BTreeMap::new();
        for m in Metric::ALL {
            let values: Vec<f64> = match unit {
                CiUnit::Record => records.iter().map(|r| m.of(r)).collect(),
                CiUnit::Repetition => {
                    let mut by_rep: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                    for r in records {
                        by_rep.entry(r.repetition).or_default().push(m.of(r));
                    }
                    by_rep.values().map(|v| mean(v)).collect()
                }
            };
            let (ci_low, ci_high) = if values.len() >= 2 {
                ci95(&values)?
            } else {
                let v = mean(&values);
                (v, v)
            };
            out.insert(
                m,
                Aggregate {
                    mean: mean(&values),
                    ci_low,
                    ci_high,
                },
            );
        }
        Ok(out)
    }

    /// How many records selected each canonical feature.
    pub fn selection_counts(&self, n_features: usize) -> Vec<usize> {
        let mut counts = vec![0; n_features];
        for r in &self.records {
            for &j in &r.selected_features {
                counts[j] += 1;
            }
        }
        counts
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), text + "\n").map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Flat per-record CSV.
    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "scheme",
            "selector",
            "model",
            "repetition",
            "fold",
            "accuracy",
            "sensitivity",
            "specificity",
            "auc",
            "n_test",
            "n_model_inputs",
        ])?;
        for r in &self.records {
            w.write_record([
                self.config.scheme.name().to_string(),
                self.config.selector.name().to_string(),
                self.config.model.name().to_string(),
                r.repetition.to_string(),
                r.fold.to_string(),
                r.accuracy.to_string(),
                r.sensitivity.to_string(),
                r.specificity.to_string(),
                r.auc.to_string(),
                r.n_test.to_string(),
                r.n_model_inputs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

struct FoldOutcome {
    record: MetricRecord,
    misclassified: Vec<Misclassified>,
    tuning: Option<TuneResult>,
}

fn rows<F: Scalar>(x: ArrayView2<F>, idx: &[usize]) -> Array2<F> {
    x.select(Axis(0), idx)
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Mean misclassification error over an inner k-fold split.
fn inner_cv_error<F: Scalar>(
    hp: &Hyperparameters,
    x: ArrayView2<F>,
    y: &[Label],
    assignment: &[usize],
    k: usize,
    seed: u64,
) -> f64 {
    let mut total = 0.0;
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
        let xt = rows(x, &train);
        let yt = pick(y, &train);
        let Ok(model) = fit_model(hp, xt.view(), &yt, seed) else {
            return f64::NAN;
        };
        let threshold = model.threshold();
        let mut wrong = 0usize;
        for &i in &test {
            match model.predict_score(&x.row(i).to_vec()) {
                Ok(s) => {
                    if (s >= threshold) != y[i].is_pd() {
                        wrong += 1;
                    }
                }
                Err(_) => return f64::NAN,
            }
        }
        total += wrong as f64 / test.len().max(1) as f64;
    }
    total / k as f64
}

/// Tunes the hyperparameters of `kind` on training data only.
#[allow(clippy::too_many_arguments)]
pub fn tune_model<F: Scalar>(
    kind: ModelKind,
    x: ArrayView2<F>,
    y: &[Label],
    groups: Option<&[usize]>,
    budget: usize,
    inner_k: usize,
    tune_seed: u64,
    model_seed: u64,
) -> Result<(Hyperparameters, Option<TuneResult>)> {
    let Some(space) = SearchSpace::for_model(kind) else {
        return Ok((Hyperparameters::default_for(kind), None));
    };
    let result = match kind {
        ModelKind::Forest => bayes_optimize(
            |p| {
                let Ok(Hyperparameters::Forest { n_trees, min_leaf, max_features }) =
                    hyperparameters_from_point(kind, p)
                else {
                    return f64::NAN;
                };
                let params = ForestParams {
                    n_trees,
                    max_features,
                    min_leaf,
                    seed: model_seed,
                };
                fit_random_forest(x, y, &params).map_or(f64::NAN, |f| f.oob_error)
            },
            &space,
            budget,
            tune_seed,
        )?,
        _ => {
            let assignment = stratified_assignment(y, groups, inner_k, seed::derive(tune_seed, stream::INNER_FOLDS))?;
            bayes_optimize(
                |p| match hyperparameters_from_point(kind, p) {
                    Ok(hp) => inner_cv_error(&hp, x, y, &assignment, inner_k, model_seed),
                    Err(_) => f64::NAN,
                },
                &space,
                budget,
                tune_seed,
            )?
        }
    };
    let hp = hyperparameters_from_point(kind, &result.best_point)?;
    Ok((hp, Some(result)))
}

/// Fits the configured selector on training rows.
pub fn fit_selector<F: Scalar>(
    kind: SelectorKind,
    x: ArrayView2<F>,
    y: &[Label],
    groups: Option<&[usize]>,
    config: &CvConfig,
    seed: u64,
) -> Result<Selector<F>> {
    Ok(match kind {
        SelectorKind::Wilcoxon => Selector::Mask(wilcoxon_filter(x, y, config.alpha)?),
        SelectorKind::Lasso => {
            let lc = LassoConfig {
                grid: None,
                folds: config.inner_k,
                seed,
            };
            Selector::Mask(lasso_select(x, y, &lc, groups)?.mask)
        }
        SelectorKind::Pca => Selector::Pca(pca_fit(x, config.pca_threshold)?),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_fold<F: Scalar>(
    cohort: &Cohort,
    x: ArrayView2<F>,
    y: &[Label],
    groups: &[usize],
    plan: &FoldPlan,
    repetition: usize,
    fold: usize,
    config: &CvConfig,
) -> Result<FoldOutcome> {
    let test = &plan.folds[fold];
    let train = plan.train_indices(fold);
    let x_tr = rows(x, &train);
    let y_tr = pick(y, &train);
    let x_te = rows(x, test);
    let y_te = pick(y, test);
    for class in [Label::Normal, Label::EarlyPd] {
        if !y_tr.contains(&class) {
            return Err(Error::Fold {
                repetition,
                fold,
                message: format!("training data lacks class {}", class.name()),
            });
        }
    }
    let g_tr = match config.scheme {
        Scheme::SubjectWise => Some(pick(groups, &train)),
        Scheme::RecordWise => None,
    };
    let path = |s: u64| seed::derive_path(config.seed, &[s, repetition as u64, fold as u64]);

    let selector = fit_selector(config.selector, x_tr.view(), &y_tr, g_tr.as_deref(), config, path(stream::SELECTOR))?;
    let z_tr = selector.apply(x_tr.view())?;
    let z_te = selector.apply(x_te.view())?;
    let model_seed = path(stream::MODEL);
    let (hp, tuning) = tune_model(
        config.model,
        z_tr.view(),
        &y_tr,
        g_tr.as_deref(),
        config.tune_budget,
        config.inner_k,
        path(stream::TUNE),
        model_seed,
    )?;
    let model = fit_model(&hp, z_tr.view(), &y_tr, model_seed)?;
    let scores = model.predict_scores(z_te.view())?;
    let conf = confusion_metrics(&scores, &y_te, model.threshold())?;
    let auc = roc_auc(&scores, &y_te)?;
    let threshold = model.threshold();
    let misclassified = test
        .iter()
        .zip(&scores)
        .filter(|(&i, &s)| (s >= threshold) != y[i].is_pd())
        .map(|(&i, &s)| {
            let o = &cohort.observations()[i];
            Misclassified {
                repetition,
                fold,
                subject_id: o.subject_id.clone(),
                visit: o.visit,
                label: o.label,
                predicted: o.label.other(),
                score: s.to_f64_lossy(),
            }
        })
        .collect();
    let selected_features = match &selector {
        Selector::Mask(m) => m.selected().to_vec(),
        Selector::Pca(_) => Vec::new(),
    };
    Ok(FoldOutcome {
        record: MetricRecord {
            repetition,
            fold,
            accuracy: conf.accuracy,
            sensitivity: conf.sensitivity,
            specificity: conf.specificity,
            auc,
            n_test: test.len(),
            selected_features,
            n_model_inputs: selector.output_dim(),
            hyperparameters: hp,
            tune_best_objective: tuning.as_ref().map(|t| t.best_objective),
        },
        misclassified,
        tuning,
    })
}

pub fn run_nested_cv<F: Scalar>(cohort: &Cohort, config: &CvConfig) -> Result<CvReport> {
    if config.repetitions == 0 || config.k < 2 || config.inner_k < 2 {
        return Err(Error::InvalidInput("repetitions >= 1, k >= 2 and inner_k >= 2 required".into()));
    }
    let x = cohort.design_matrix::<F>();
    let y = cohort.labels();
    let groups = subject_groups(cohort);
    let plans: Vec<FoldPlan> = (0..config.repetitions)
        .map(|r| {
            make_fold_plan(
                cohort,
                config.scheme,
                config.k,
                seed::derive_path(config.seed, &[stream::REPETITION, r as u64]),
            )
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..config.repetitions)
        .flat_map(|r| (0..config.k).map(move |f| (r, f)))
        .collect();
    let outcomes: Vec<Result<FoldOutcome>> = tasks
        .par_iter()
        .map(|&(r, f)| {
            run_fold(cohort, x.view(), &y, &groups, &plans[r], r, f, config).map_err(|e| match e {
                e @ Error::Fold { .. } => e,
                other => Error::Fold {
                    repetition: r,
                    fold: f,
                    message: other.to_string(),
                },
            })
        })
        .collect();
    let mut records = Vec::with_capacity(tasks.len());
    let mut misclassified = Vec::new();
    let mut tuning = Vec::new();
    for o in outcomes {
        let o = o?;
        records.push(o.record);
        misclassified.extend(o.misclassified);
        tuning.extend(o.tuning);
    }
    let aggregates = CvReport::compute_aggregates(&records, config.ci_unit)?;
    Ok(CvReport {
        config: config.clone(),
        toolkit_version: crate::VERSION.to_string(),
        records,
        aggregates,
        misclassified,
        tuning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{synthesize_cohort, GroupMoments, SynthConfig};

    fn small_cohort(seed: u64) -> Cohort {
        let config = SynthConfig {
            n_normal_subjects: 30,
            n_pd_subjects: 40,
            visits_normal: 2.0,
            visits_pd: 3.0,
            seed,
        };
        synthesize_cohort(&GroupMoments::table2(), &config).unwrap()
    }

    fn config(scheme: Scheme, model: ModelKind) -> CvConfig {
        let mut c = CvConfig::new(scheme, SelectorKind::Wilcoxon, model, 11);
        c.repetitions = 1;
        c.tune_budget = 4;
        c.inner_k = 3;
        c
    }

    #[test]
    fn one_repetition_gives_k_records() {
        let cohort = small_cohort(1);
        let report = run_nested_cv::<f64>(&cohort, &config(Scheme::RecordWise, ModelKind::Logistic)).unwrap();
        assert_eq!(report.records.len(), 10);
        let n: usize = report.records.iter().map(|r| r.n_test).sum();
        assert_eq!(n, cohort.len());
        for r in &report.records {
            for v in [r.accuracy, r.sensitivity, r.specificity, r.auc] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn reproducible_and_aggregates_recompute_exactly() {
        let cohort = small_cohort(2);
        let mut c = config(Scheme::SubjectWise, ModelKind::Forest);
        c.repetitions = 2;
        let a = run_nested_cv::<f64>(&cohort, &c).unwrap();
        let b = run_nested_cv::<f64>(&cohort, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(CvReport::compute_aggregates(&a.records, c.ci_unit).unwrap(), a.aggregates);
        let json = serde_json::to_string(&a).unwrap();
        let back: CvReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn repetition_ci_unit() {
        let cohort = small_cohort(3);
        let mut c = config(Scheme::RecordWise, ModelKind::Logistic);
        c.repetitions = 3;
        c.ci_unit = CiUnit::Repetition;
        let r = run_nested_cv::<f64>(&cohort, &c).unwrap();
        let rec = CvReport::compute_aggregates(&r.records, CiUnit::Record).unwrap();
        for m in Metric::ALL {
            assert!((rec[&m].mean - r.aggregates[&m].mean).abs() < 1e-12);
        }
    }

    #[test]
    fn tuned_models_run() {
        let cohort = small_cohort(4);
        for model in [ModelKind::Boost, ModelKind::Svm] {
            let mut c = config(Scheme::SubjectWise, model);
            c.k = 3;
            let r = run_nested_cv::<f64>(&cohort, &c).unwrap();
            assert_eq!(r.tuning.len(), 3);
            assert!(r.tuning.iter().all(|t| t.history.len() == 4));
        }
    }

    #[test]
    fn fold_plan_error_propagates() {
        let cohort = small_cohort(5);
        let mut c = config(Scheme::SubjectWise, ModelKind::Logistic);
        c.k = 50;
        assert!(matches!(run_nested_cv::<f64>(&cohort, &c), Err(Error::FoldPlan(_))));
    }

    #[test]
    fn misclassified_match_records() {
        let cohort = small_cohort(6);
        let r = run_nested_cv::<f64>(&cohort, &config(Scheme::RecordWise, ModelKind::Logistic)).unwrap();
        for rec in &r.records {
            let wrong = r.misclassified.iter().filter(|m| m.fold == rec.fold).count();
            let expected = ((1.0 - rec.accuracy) * rec.n_test as f64).round() as usize;
            assert_eq!(wrong, expected);
        }
        assert!(r.misclassified.iter().all(|m| m.predicted != m.label));
    }

    #[test]
    fn f32_pipeline() {
        let cohort = small_cohort(7);
        let r = run_nested_cv::<f32>(&cohort, &config(Scheme::RecordWise, ModelKind::Logistic)).unwrap();
        assert_eq!(r.records.len(), 10);
    }
}
