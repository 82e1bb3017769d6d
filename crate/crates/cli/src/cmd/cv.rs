use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use pqscreen::cohort::Cohort;
use pqscreen::eval::baseline::MisclassificationProfile;
use pqscreen::eval::{
    misclassification_profile, run_nested_cv, total_score_baseline, CiUnit, CvConfig, CvReport, Metric, Scheme,
    SelectorKind,
};
use pqscreen::learn::ModelKind;
use pqscreen::tune::DEFAULT_BUDGET;

use crate::error::CliError;
use crate::output::say;
use crate::output::{load_cohort, path_string, write_csv, write_json, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Cohort CSV.
    #[arg(long)]
    data: PathBuf,
    /// subject, record or all.
    #[arg(long, default_value = "subject")]
    scheme: String,
    /// wilcoxon, lasso, pca or all.
    #[arg(long, default_value = "wilcoxon")]
    selector: String,
    /// logistic, forest, boost, svm or all.
    #[arg(long, default_value = "logistic")]
    model: String,
    /// Outer folds.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Repetitions of the outer split.
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Objective evaluations per tuning run.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    tune_budget: usize,
    /// Inner folds for tuning and LASSO.
    #[arg(long, default_value_t = 10)]
    inner_k: usize,
    /// Rank-sum filter level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// PCA retained-variance threshold.
    #[arg(long, default_value_t = 0.99)]
    pca_threshold: f64,
    /// Confidence intervals over fold records or repetition means.
    #[arg(long, value_enum, default_value = "record")]
    ci_unit: CiUnitArg,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum CiUnitArg {
    Record,
    Repetition,
}

/// Everything `cv` writes to its JSON report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutput {
    pub run_config: Value,
    pub toolkit_version: String,
    pub total_score_baseline_auc: f64,
    pub misclassification_profile: MisclassificationProfile,
    pub report: CvReport,
}

/// Reads a `cv` output file, or a bare report.
pub fn read_report(path: &Path) -> Result<CvReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::output::io_error(path, e))?;
    let value: Value = serde_json::from_str(&text)?;
    if value.get("report").is_some() {
        Ok(serde_json::from_value::<CvOutput>(value)?.report)
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn expand<T: Copy>(arg: &str, all: &[T], parse: impl Fn(&str) -> Result<T, pqscreen::Error>) -> Result<Vec<T>, CliError> {
    if arg == "all" {
        Ok(all.to_vec())
    } else {
        arg.split(',').map(|s| parse(s.trim()).map_err(|e| CliError::Usage(e.to_string()))).collect()
    }
}

fn profile_csv(p: &MisclassificationProfile, buf: &mut Vec<u8>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["class", "item", "observations", "s0", "s1", "s2", "s3", "s4"])?;
    for h in [&p.normal, &p.pd] {
        for (j, name) in pqscreen::cohort::PQ_ITEMS.iter().enumerate() {
            let c = h.counts[j];
            w.write_record([
                h.label.name().to_string(),
                name.to_string(),
                h.observations.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
                c[3].to_string(),
                c[4].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::Core(pqscreen::Error::Io { path: "<csv>".into(), source: e }))?;
    Ok(())
}

fn run_one(a: &Args, cohort: &Cohort, baseline: f64, config: CvConfig) -> Result<CvReport, CliError> {
    let stem = format!("cv_{}_{}_{}", config.scheme.name(), config.selector, config.model);
    let json_path = a.out_dir.join(format!("{stem}.json"));
    let csv_path = a.out_dir.join(format!("{stem}.csv"));
    let profile_path = a.out_dir.join(format!("{stem}_misclassified.csv"));
    let mut run = RunConfig::new("cv")
        .param("inner_k", config.inner_k)
        .param("alpha", config.alpha)
        .param("pca_threshold", config.pca_threshold)
        .param("ci_unit", config.ci_unit);
    run.inputs = vec![path_string(&a.data)];
    run.outputs = vec![path_string(&json_path), path_string(&csv_path), path_string(&profile_path)];
    run.scheme = Some(config.scheme.name().into());
    run.selector = Some(config.selector.name().into());
    run.model = Some(config.model.name().into());
    run.k = Some(config.k);
    run.repetitions = Some(config.repetitions);
    run.seed = Some(config.seed);
    run.tune_budget = Some(config.tune_budget);
    run.threshold = Some(config.model.threshold());

    log::info!("running {stem}");
    let report = run_nested_cv::<f64>(cohort, &config)?;
    let profile = misclassification_profile(&report, cohort)?;
    write_csv(&csv_path, &run, |buf| Ok(report.write_records_csv(buf)?))?;
    write_csv(&profile_path, &run, |buf| profile_csv(&profile, buf))?;
    write_json(
        &json_path,
        &CvOutput {
            run_config: run.to_value(),
            toolkit_version: pqscreen::VERSION.into(),
            total_score_baseline_auc: baseline,
            misclassification_profile: profile,
            report: report.clone(),
        },
    )?;
    Ok(report)
}

pub fn run(a: Args) -> Result<(), CliError> {
    let schemes = expand(&a.scheme, &[Scheme::SubjectWise, Scheme::RecordWise], str::parse)?;
    let selectors = expand(&a.selector, &SelectorKind::ALL, str::parse)?;
    let models = expand(&a.model, &ModelKind::ALL, str::parse)?;
    if a.k < 2 || a.reps < 1 || a.inner_k < 2 {
        return Err(CliError::Usage("--k and --inner-k must be at least 2, --reps at least 1".into()));
    }
    let cohort = load_cohort(&a.data)?;
    let baseline = total_score_baseline(&cohort)?;
    say!("total-score baseline AUC {baseline:.4}");
    say!(
        "{:<13} {:<9} {:<9} {:>24} {:>24} {:>24} {:>24}",
        "scheme", "selector", "model", "accuracy", "sensitivity", "specificity", "auc"
    );
    for &scheme in &schemes {
        for &selector in &selectors {
            for &model in &models {
                let mut config = CvConfig::new(scheme, selector, model, a.seed);
                config.k = a.k;
                config.repetitions = a.reps;
                config.tune_budget = a.tune_budget;
                config.inner_k = a.inner_k;
                config.alpha = a.alpha;
                config.pca_threshold = a.pca_threshold;
                config.ci_unit = match a.ci_unit {
                    CiUnitArg::Record => CiUnit::Record,
                    CiUnitArg::Repetition => CiUnit::Repetition,
                };
                let report = run_one(&a, &cohort, baseline, config)?;
                let cell = |m: Metric| {
                    let g = report.aggregates[&m];
                    format!("{:.4} [{:.4},{:.4}]", g.mean, g.ci_low, g.ci_high)
                };
                say!(
                    "{:<13} {:<9} {:<9} {:>24} {:>24} {:>24} {:>24}",
                    scheme.name(),
                    selector.name(),
                    model.name(),
                    cell(Metric::Accuracy),
                    cell(Metric::Sensitivity),
                    cell(Metric::Specificity),
                    cell(Metric::Auc)
                );
            }
        }
    }
    Ok(())
}
