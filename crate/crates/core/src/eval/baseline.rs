//! Total-score baseline, misclassification profiles and HY correlations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cv::CvReport;
use super::metrics::roc_auc;
use crate::cohort::{Cohort, Label, SeverityHistogram, FEATURE_NAMES, SBR_COLUMNS};
use crate::error::{Error, Result};
use crate::stats::{spearman, TestResult};

/// AUC of the summed questionnaire severities.
pub fn total_score_baseline(cohort: &Cohort) -> Result<f64> {
    let scores: Vec<f64> = cohort
        .observations()
        .iter()
        .map(|o| f64::from(o.features.total_score()))
        .collect();
    roc_auc(&scores, &cohort.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassificationProfile {
    pub normal: SeverityHistogram,
    pub pd: SeverityHistogram,
    /// Distinct misclassified observation indices into the cohort.
    pub observations: Vec<usize>,
}

/// Severity histograms of the distinct observations misclassified at least once.
pub fn misclassification_profile(report: &CvReport, cohort: &Cohort) -> Result<MisclassificationProfile> {
    let mut seen = BTreeSet::new();
    for m in &report.misclassified {
        let i = cohort.position(&m.subject_id, m.visit).ok_or_else(|| {
            Error::InvalidInput(format!(
                "misclassified observation {} visit {} not in cohort",
                m.subject_id, m.visit
            ))
        })?;
        seen.insert(i);
    }
    let obs = cohort.observations();
    let normal = SeverityHistogram::from_observations(Label::Normal, seen.iter().map(|&i| &obs[i]));
    let pd = SeverityHistogram::from_observations(Label::EarlyPd, seen.iter().map(|&i| &obs[i]));
    Ok(MisclassificationProfile {
        normal,
        pd,
        observations: seen.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub variable: String,
    pub n: usize,
    pub rho: f64,
    pub p_value: f64,
}

/// Spearman correlation of each feature, the questionnaire total and any SBR
/// columns against HY stage, over observations that carry HY.
pub fn correlation_with_hy(cohort: &Cohort) -> Result<Vec<Correlation>> {
    let rows: Vec<_> = cohort.observations().iter().filter(|o| o.hy_stage.is_some()).collect();
    if rows.is_empty() {
        return Err(Error::MissingColumn("HY".into()));
    }
    let hy: Vec<f64> = rows.iter().map(|o| f64::from(o.hy_stage.unwrap())).collect();
    if hy.iter().all(|&h| h == hy[0]) {
        return Err(Error::Degenerate("HY stage is constant".into()));
    }
    let mut out = Vec::new();
    let mut push = |name: &str, x: &[f64], y: &[f64]| -> Result<()> {
        let r: TestResult = match spearman(x, y) {
            Ok(r) => r,
            Err(Error::Degenerate(_)) => TestResult {
                statistic: f64::NAN,
                p_value: f64::NAN,
                method: crate::stats::TestMethod::Spearman,
            },
            Err(e) => return Err(e),
        };
        out.push(Correlation {
            variable: name.to_string(),
            n: x.len(),
            rho: r.statistic,
            p_value: r.p_value,
        });
        Ok(())
    };
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let x: Vec<f64> = rows.iter().map(|o| o.features.to_values::<f64>()[j]).collect();
        push(name, &x, &hy)?;
    }
    let total: Vec<f64> = rows.iter().map(|o| f64::from(o.features.total_score())).collect();
    push("PQ_TOTAL", &total, &hy)?;
    let with_sbr: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].sbr.is_some()).collect();
    if !with_sbr.is_empty() {
        let hy_s: Vec<f64> = with_sbr.iter().map(|&i| hy[i]).collect();
        for (c, name) in SBR_COLUMNS.iter().enumerate() {
            let x: Vec<f64> = with_sbr.iter().map(|&i| rows[i].sbr.unwrap()[c]).collect();
            push(name, &x, &hy_s)?;
        }
    }
    Ok(out)
}

pub fn write_correlations_csv<W: std::io::Write>(rows: &[Correlation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["variable", "n", "rho", "p_value"])?;
    for r in rows {
        w.write_record([r.variable.clone(), r.n.to_string(), r.rho.to_string(), r.p_value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{FeatureVector, Observation, N_PQ};
    use crate::eval::cv::{CiUnit, CvConfig, Misclassified, SelectorKind};
    use crate::eval::folds::Scheme;
    use crate::learn::ModelKind;

    fn obs(id: usize, label: Label, tremor: u8, hy: Option<u8>) -> Observation {
        let mut pq = [0u8; N_PQ];
        pq[16] = tremor;
        Observation {
            subject_id: format!("s{id}"),
            visit: 0,
            features: FeatureVector::new(pq, 60.0 + id as f64, (id % 2) as u8).unwrap(),
            label,
            hy_stage: hy,
            sbr: None,
        }
    }

    fn empty_report(misclassified: Vec<Misclassified>) -> CvReport {
        CvReport {
            config: CvConfig::new(Scheme::RecordWise, SelectorKind::Wilcoxon, ModelKind::Logistic, 0),
            toolkit_version: String::new(),
            records: vec![],
            aggregates: CvReport::compute_aggregates(&[], CiUnit::Record).unwrap_or_default(),
            misclassified,
            tuning: vec![],
        }
    }

    #[test]
    fn total_score_separates() {
        let cohort = Cohort::new(vec![
            obs(0, Label::Normal, 0, None),
            obs(1, Label::Normal, 1, None),
            obs(2, Label::EarlyPd, 2, None),
            obs(3, Label::EarlyPd, 3, None),
        ])
        .unwrap();
        assert_eq!(total_score_baseline(&cohort).unwrap(), 1.0);
    }

    #[test]
    fn profiles() {
        let cohort = Cohort::new(vec![
            obs(0, Label::Normal, 0, None),
            obs(1, Label::Normal, 1, None),
            obs(2, Label::EarlyPd, 2, None),
        ])
        .unwrap();
        let p = misclassification_profile(&empty_report(vec![]), &cohort).unwrap();
        assert_eq!(p.normal.observations, 0);
        assert_eq!(p.pd.observations, 0);

        let all: Vec<Misclassified> = cohort
            .observations()
            .iter()
            .flat_map(|o| {
                // each observation reported twice, counted once
                (0..2).map(move |r| Misclassified {
                    repetition: r,
                    fold: 0,
                    subject_id: o.subject_id.clone(),
                    visit: o.visit,
                    label: o.label,
                    predicted: o.label.other(),
                    score: 0.5,
                })
            })
            .collect();
        let p = misclassification_profile(&empty_report(all), &cohort).unwrap();
        let full_n = crate::cohort::severity_distribution(&cohort, Label::Normal).unwrap();
        assert_eq!(p.normal, full_n);
        assert_eq!(p.pd.observations, 1);

        let bad = vec![Misclassified {
            repetition: 0,
            fold: 0,
            subject_id: "nobody".into(),
            visit: 0,
            label: Label::Normal,
            predicted: Label::EarlyPd,
            score: 0.9,
        }];
        assert!(misclassification_profile(&empty_report(bad), &cohort).is_err());
    }

    #[test]
    fn hy_correlation() {
        let cohort = Cohort::new(
            (0..10)
                .map(|i| obs(i, Label::EarlyPd, (i % 4) as u8, Some((i % 4) as u8)))
                .collect(),
        )
        .unwrap();
        let rows = correlation_with_hy(&cohort).unwrap();
        assert_eq!(rows.len(), 23);
        let tremor = rows.iter().find(|r| r.variable == "P2_TRMR").unwrap();
        assert!((tremor.rho - 1.0).abs() < 1e-12);
        let total = rows.iter().find(|r| r.variable == "PQ_TOTAL").unwrap();
        assert!((total.rho - 1.0).abs() < 1e-12);
        let slpn = rows.iter().find(|r| r.variable == "P1_SLPN").unwrap();
        assert!(slpn.rho.is_nan());
    }

    #[test]
    fn hy_errors() {
        let none = Cohort::new((0..5).map(|i| obs(i, Label::EarlyPd, 1, None)).collect()).unwrap();
        assert!(matches!(correlation_with_hy(&none), Err(Error::MissingColumn(_))));
        let constant = Cohort::new((0..5).map(|i| obs(i, Label::EarlyPd, 1, Some(2))).collect()).unwrap();
        assert!(matches!(correlation_with_hy(&constant), Err(Error::Degenerate(_))));
    }
}
