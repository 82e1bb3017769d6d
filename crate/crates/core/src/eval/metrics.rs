//! ROC AUC and threshold metrics with PD as the positive class.

use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::midranks;

fn class_counts(labels: &[Label]) -> Result<(usize, usize)> {
    let pd = labels.iter().filter(|l| l.is_pd()).count();
    if pd == 0 || pd == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok((pd, labels.len() - pd))
}

/// Mann-Whitney AUC: `(concordant + ½·tied) / (n_pd · n_normal)`, from
/// the midrank sum of the PD scores.
pub fn roc_auc<F: Scalar>(scores: &[F], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let (n1, n0) = class_counts(labels)?;
    let s: Vec<f64> = scores.iter().map(|v| v.to_f64_lossy() + 0.0).collect();
    if s.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let (ranks, _) = midranks(&s);
    let r1: f64 = ranks.iter().zip(labels).filter(|(_, l)| l.is_pd()).map(|(r, _)| r).sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

/// `score >= threshold` predicts PD.
pub fn confusion_metrics<F: Scalar>(scores: &[F], labels: &[Label], threshold: F) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    class_counts(labels)?;
    let (mut tp, mut fn_, mut tn, mut fp) = (0, 0, 0, 0);
    for (&s, l) in scores.iter().zip(labels) {
        match (s >= threshold, l.is_pd()) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
        }
    }
    Ok(Confusion {
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        sensitivity: tp as f64 / (tp + fn_) as f64,
        specificity: tn as f64 / (tn + fp) as f64,
        tp,
        fn_,
        tn,
        fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::from_pd(b == 1)).collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2], &labels(&[0, 1])).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &labels(&[0, 1, 0, 1])).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.8, 0.6, 0.4, 0.2], &labels(&[1, 0, 1, 0])).unwrap(), 0.75);
        assert!(matches!(roc_auc(&[0.1, 0.2], &labels(&[1, 1])), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_matches_pair_count_and_is_rank_invariant() {
        let mut rng = crate::seed::rng(8);
        for _ in 0..200 {
            let n = rng.random_range(2..80);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
            let mut y: Vec<Label> = (0..n).map(|_| Label::from_pd(rng.random::<bool>())).collect();
            y[0] = Label::Normal;
            y[1] = Label::EarlyPd;
            let (mut num, mut n1, mut n0) = (0.0, 0, 0);
            for i in 0..n {
                if !y[i].is_pd() {
                    n0 += 1;
                    continue;
                }
                n1 += 1;
                for j in 0..n {
                    if !y[j].is_pd() {
                        num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                    }
                }
            }
            let a = roc_auc(&s, &y).unwrap();
            assert_eq!(a, num / (n1 as f64 * n0 as f64));
            let t: Vec<f64> = s.iter().map(|v| v.exp() * 3.0 - 1.0).collect();
            assert_eq!(roc_auc(&t, &y).unwrap(), a);
        }
    }

    #[test]
    fn confusion_examples() {
        let y = labels(&[1, 1, 0, 0]);
        let c = confusion_metrics(&[0.9, 0.8, 0.1, 0.2], &y, 0.5).unwrap();
        assert_eq!((c.accuracy, c.sensitivity, c.specificity), (1.0, 1.0, 1.0));
        let c = confusion_metrics(&[1.0; 4], &y, 0.5).unwrap();
        assert_eq!((c.accuracy, c.sensitivity, c.specificity), (0.5, 1.0, 0.0));
        let mut s = vec![0.0; 200];
        let mut y = Vec::new();
        for i in 0..100 {
            y.push(Label::EarlyPd);
            s[i] = if i < 90 { 1.0 } else { 0.0 };
        }
        for i in 0..100 {
            y.push(Label::Normal);
            s[100 + i] = if i < 80 { 0.0 } else { 1.0 };
        }
        let c = confusion_metrics(&s, &y, 0.5).unwrap();
        assert_eq!((c.accuracy, c.sensitivity, c.specificity), (0.85, 0.90, 0.80));
    }

    #[test]
    fn random_scores_sum_to_one() {
        let mut rng = crate::seed::rng(3);
        let n = 20_000;
        let y: Vec<Label> = (0..n).map(|_| Label::from_pd(rng.random::<f64>() < 0.7)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        for t in [0.1, 0.5, 0.9] {
            let c = confusion_metrics(&s, &y, t).unwrap();
            assert!((c.sensitivity + c.specificity - 1.0).abs() < 0.03);
        }
    }
}
