//! Multiple comparison of cross-validation reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cv::{CvReport, Metric};
use crate::error::{Error, Result};
use crate::stats::{anova_tukey, PairwiseComparison, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Not significantly different from the best method.
    pub in_best_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: Metric,
    pub alpha: f64,
    pub anova_f: f64,
    pub anova_p: f64,
    pub best: usize,
    pub methods: Vec<MethodSummary>,
    pub pairwise: Vec<PairwiseComparison>,
}

/// `selector/model` label of a report.
pub fn report_label(r: &CvReport) -> String {
    format!("{}/{}", r.config.selector, r.config.model)
}

/// One-way ANOVA with Tukey-Kramer intervals over the per-record metric values.
pub fn compare_classifiers(reports: &[CvReport], metric: Metric, alpha: f64) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::InvalidInput("comparison needs at least 2 reports".into()));
    }
    let scheme = reports[0].config.scheme;
    let n = reports[0].records.len();
    for r in reports {
        if r.config.scheme != scheme {
            return Err(Error::InvalidInput(format!(
                "reports mix schemes {} and {}",
                scheme.name(),
                r.config.scheme.name()
            )));
        }
        if r.records.len() != n {
            return Err(Error::InvalidInput(format!(
                "record counts differ: {n} vs {}",
                r.records.len()
            )));
        }
    }
    let groups: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| r.records.iter().map(|rec| metric.of(rec)).collect())
        .collect();
    let (anova, pairwise): (TestResult, Vec<PairwiseComparison>) = match anova_tukey(&groups, alpha) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => {
            // identical constant groups: nothing differs
            let mut pw = Vec::new();
            for a in 0..groups.len() {
                for b in (a + 1)..groups.len() {
                    pw.push(PairwiseComparison {
                        group_a: a,
                        group_b: b,
                        mean_diff: 0.0,
                        ci_low: 0.0,
                        ci_high: 0.0,
                        significant: false,
                    });
                }
            }
            (
                TestResult {
                    statistic: 0.0,
                    p_value: 1.0,
                    method: crate::stats::TestMethod::Anova,
                },
                pw,
            )
        }
        Err(e) => return Err(e),
    };
    let means: Vec<f64> = groups.iter().map(|g| crate::stats::mean(g)).collect();
    let best = (0..means.len())
        .max_by(|&a, &b| means[a].total_cmp(&means[b]).then(b.cmp(&a)))
        .expect("non-empty");
    let differs_from_best = |i: usize| {
        i != best
            && pairwise
                .iter()
                .any(|p| p.significant && ((p.group_a == i && p.group_b == best) || (p.group_a == best && p.group_b == i)))
    };
    let methods = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let agg = r.aggregates.get(&metric).copied();
            MethodSummary {
                label: report_label(r),
                mean: means[i],
                ci_low: agg.map_or(f64::NAN, |a| a.ci_low),
                ci_high: agg.map_or(f64::NAN, |a| a.ci_high),
                in_best_set: !differs_from_best(i),
            }
        })
        .collect();
    Ok(Comparison {
        metric,
        alpha,
        anova_f: anova.statistic,
        anova_p: anova.p_value,
        best,
        methods,
        pairwise,
    })
}

/// Table with one row per (report, metric): scheme, selector, model, mean and CI.
pub fn write_summary_csv<W: Write>(reports: &[CvReport], comparisons: &[Comparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "scheme",
        "selector",
        "model",
        "metric",
        "mean",
        "ci_low",
        "ci_high",
        "best",
        "in_best_set",
    ])?;
    for c in comparisons {
        for (i, (r, m)) in reports.iter().zip(&c.methods).enumerate() {
            w.write_record([
                r.config.scheme.name().to_string(),
                r.config.selector.name().to_string(),
                r.config.model.name().to_string(),
                c.metric.name().to_string(),
                m.mean.to_string(),
                m.ci_low.to_string(),
                m.ci_high.to_string(),
                (i == c.best).to_string(),
                m.in_best_set.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Pairwise Tukey-Kramer rows.
pub fn write_pairwise_csv<W: Write>(comparisons: &[Comparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "method_a", "method_b", "mean_diff", "ci_low", "ci_high", "significant"])?;
    for c in comparisons {
        for p in &c.pairwise {
            w.write_record([
                c.metric.name().to_string(),
                c.methods[p.group_a].label.clone(),
                c.methods[p.group_b].label.clone(),
                p.mean_diff.to_string(),
                p.ci_low.to_string(),
                p.ci_high.to_string(),
                p.significant.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cv::{CiUnit, CvConfig, MetricRecord, SelectorKind};
    use crate::eval::folds::Scheme;
    use crate::learn::{Hyperparameters, ModelKind};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn report(model: ModelKind, values: &[f64]) -> CvReport {
        let records: Vec<MetricRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| MetricRecord {
                repetition: i / 10,
                fold: i % 10,
                accuracy: v,
                sensitivity: v,
                specificity: v,
                auc: v,
                n_test: 10,
                selected_features: vec![],
                n_model_inputs: 22,
                hyperparameters: Hyperparameters::Logistic,
                tune_best_objective: None,
            })
            .collect();
        let aggregates = CvReport::compute_aggregates(&records, CiUnit::Record).unwrap();
        CvReport {
            config: CvConfig::new(Scheme::RecordWise, SelectorKind::Wilcoxon, model, 0),
            toolkit_version: String::new(),
            records,
            aggregates,
            misclassified: vec![],
            tuning: vec![],
        }
    }

    fn noisy(seed: u64, shift: f64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.8, 0.05).unwrap();
        (0..100).map(|_| d.sample(&mut rng) + shift).collect()
    }

    #[test]
    fn identical_reports_do_not_differ() {
        let v = noisy(1, 0.0);
        let c = compare_classifiers(&[report(ModelKind::Logistic, &v), report(ModelKind::Forest, &v)], Metric::Auc, 0.05)
            .unwrap();
        assert!(c.pairwise.iter().all(|p| !p.significant));
        assert!(c.methods.iter().all(|m| m.in_best_set));
    }

    #[test]
    fn shifted_report_differs() {
        let v = noisy(2, 0.0);
        let w: Vec<f64> = v.iter().map(|x| x + 0.2).collect();
        let c = compare_classifiers(&[report(ModelKind::Logistic, &v), report(ModelKind::Forest, &w)], Metric::Auc, 0.05)
            .unwrap();
        assert!(c.pairwise[0].significant);
        assert_eq!(c.best, 1);
        assert!(!c.methods[0].in_best_set);
    }

    #[test]
    fn constant_identical_reports() {
        let v = vec![0.9; 20];
        let c = compare_classifiers(&[report(ModelKind::Logistic, &v), report(ModelKind::Svm, &v)], Metric::Accuracy, 0.05)
            .unwrap();
        assert_eq!(c.anova_p, 1.0);
        assert!(c.methods.iter().all(|m| m.in_best_set));
    }

    #[test]
    fn null_best_set_contains_all_mostly() {
        let mut all_in = 0;
        for s in 0..100u64 {
            let reports: Vec<CvReport> = ModelKind::ALL
                .iter()
                .enumerate()
                .map(|(i, &m)| report(m, &noisy(s * 10 + i as u64, 0.0)))
                .collect();
            let c = compare_classifiers(&reports, Metric::Auc, 0.05).unwrap();
            if c.methods.iter().all(|m| m.in_best_set) {
                all_in += 1;
            }
        }
        assert!(all_in >= 88, "{all_in}");
    }

    #[test]
    fn mismatched_schemes_rejected() {
        let v = noisy(3, 0.0);
        let a = report(ModelKind::Logistic, &v);
        let mut b = report(ModelKind::Forest, &v);
        b.config.scheme = Scheme::SubjectWise;
        assert!(compare_classifiers(&[a.clone(), b], Metric::Auc, 0.05).is_err());
        assert!(compare_classifiers(&[a], Metric::Auc, 0.05).is_err());
    }
}
