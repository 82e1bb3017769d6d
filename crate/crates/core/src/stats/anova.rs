//! One-way ANOVA with Tukey-Kramer simultaneous intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::studentized_range::qtukey;
use super::{clean_p, mean, TestMethod, TestResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub group_a: usize,
    pub group_b: usize,
    /// mean(a) - mean(b)
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
}

pub fn anova_tukey(groups: &[Vec<f64>], alpha: f64) -> Result<(TestResult, Vec<PairwiseComparison>)> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::InvalidInput("ANOVA needs at least 2 groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::InvalidInput("every ANOVA group needs at least 2 values".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0,1)")));
    }
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let n: f64 = sizes.iter().sum();
    let grand = groups.iter().flatten().sum::<f64>() / n;
    let ss_between: f64 = means.iter().zip(&sizes).map(|(m, s)| s * (m - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let df_between = (k - 1) as f64;
    let df_within = n - k as f64;
    let all_equal = means.iter().all(|m| *m == means[0]);
    if ss_within == 0.0 && all_equal {
        return Err(Error::Degenerate(
            "zero within-group variance and equal group means".into(),
        ));
    }
    let ms_within = ss_within / df_within;
    let (f, p) = if ss_within == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ss_between / df_between) / ms_within;
        let dist = FisherSnedecor::new(df_between, df_within).expect("positive df");
        (f, clean_p(dist.sf(f)))
    };

    let q = qtukey(1.0 - alpha, k, df_within);
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let diff = means[a] - means[b];
            let half = q / std::f64::consts::SQRT_2 * (ms_within * (1.0 / sizes[a] + 1.0 / sizes[b])).sqrt();
            let (lo, hi) = (diff - half, diff + half);
            pairs.push(PairwiseComparison {
                group_a: a,
                group_b: b,
                mean_diff: diff,
                ci_low: lo,
                ci_high: hi,
                significant: !(lo <= 0.0 && 0.0 <= hi),
            });
        }
    }
    Ok((
        TestResult {
            statistic: f,
            p_value: p,
            method: TestMethod::Anova,
        },
        pairs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn separated_groups_significant() {
        let a = vec![0.0, 0.001, -0.001, 0.0005];
        let b = vec![10.0, 10.001, 9.999, 10.0005];
        let (t, pairs) = anova_tukey(&[a, b], 0.05).unwrap();
        assert!(t.p_value < 1e-10);
        assert!(pairs[0].significant);
        assert!(pairs[0].mean_diff < 0.0);
    }

    #[test]
    fn identical_groups_not_significant() {
        let g = vec![1.0, 2.0, 3.0, 4.0];
        let (t, pairs) = anova_tukey(&vec![g; 4], 0.05).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(pairs.len(), 6);
        for p in pairs {
            assert_eq!(p.mean_diff, 0.0);
            assert!(!p.significant);
        }
    }

    #[test]
    fn null_case_false_positive_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let reps = 400;
        let mut flagged = 0;
        for _ in 0..reps {
            let a: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (_, pairs) = anova_tukey(&[a, b], 0.05).unwrap();
            flagged += pairs[0].significant as usize;
        }
        let rate = flagged as f64 / reps as f64;
        assert!((0.02..=0.09).contains(&rate), "false positive rate {rate}");
    }

    #[test]
    fn two_group_tukey_matches_t_interval() {
        // For k=2 the Tukey-Kramer interval coincides with the pooled t interval.
        let a = vec![1.0, 2.5, 3.0, 4.2, 2.2];
        let b = vec![2.0, 3.5, 4.0, 5.9, 4.4, 3.1];
        let (_, pairs) = anova_tukey(&[a.clone(), b.clone()], 0.05).unwrap();
        let ma = mean(&a);
        let mb = mean(&b);
        let ss: f64 = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
        let df = 9.0;
        let se = (ss / df * (1.0 / 5.0 + 1.0 / 6.0)).sqrt();
        let t = statrs::distribution::StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975);
        assert!((pairs[0].ci_high - pairs[0].mean_diff - t * se).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        assert!(anova_tukey(&[vec![1.0, 2.0]], 0.05).is_err());
        assert!(anova_tukey(&[vec![1.0], vec![1.0, 2.0]], 0.05).is_err());
        assert!(matches!(
            anova_tukey(&[vec![1.0, 1.0], vec![1.0, 1.0]], 0.05),
            Err(Error::Degenerate(_))
        ));
    }
}
