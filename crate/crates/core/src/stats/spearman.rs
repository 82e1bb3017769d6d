use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{clean_p, midranks, TestMethod, TestResult};
use crate::error::{Error, Result};

/// Spearman rank correlation: Pearson correlation of mid-ranks, with a
/// t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidInput("spearman needs at least 3 pairs".into()));
    }
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant input: rank correlation undefined".into()));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if (1.0 - rho.abs()) < 1e-15 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        clean_p(2.0 * dist.sf(t.abs()))
    };
    Ok(TestResult {
        statistic: rho,
        p_value: p,
        method: TestMethod::Spearman,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_monotone() {
        assert_eq!(spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap().statistic, 1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[30., 20., 10.]).unwrap().statistic, -1.0);
    }

    #[test]
    fn hand_computed_rho() {
        let r = spearman(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap();
        assert!((r.statistic - 0.8).abs() < 1e-12);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn errors() {
        assert!(spearman(&[1., 2., 3.], &[1., 2.]).is_err());
        assert!(spearman(&[1., 1., 1.], &[1., 2., 3.]).is_err());
        assert!(spearman(&[1., 2.], &[1., 2.]).is_err());
    }
}
