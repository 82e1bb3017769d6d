//! Two-sample Wilcoxon rank-sum test.

use super::{clean_p, midranks, two_sided_normal_p, TestMethod, TestResult};
use crate::error::{Error, Result};

/// Largest combined sample size accepted in exact mode.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMode {
    /// Null distribution by enumerating every assignment of the observed
    /// (mid-)ranks to the first sample.
    Exact,
    /// Normal approximation with tie-corrected variance.
    Approx { continuity: bool },
}

impl Default for WilcoxonMode {
    fn default() -> Self {
        WilcoxonMode::Approx { continuity: true }
    }
}

/// Two-sided test of equal location. The reported statistic is the
/// standardised rank sum of `x`; it is negative when `x` ranks low.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], mode: WilcoxonMode) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("rank-sum test needs two non-empty samples".into()));
    }
    let m = x.len();
    let n = y.len();
    let total = m + n;
    if mode == WilcoxonMode::Exact && total > EXACT_LIMIT {
        return Err(Error::InvalidInput(format!(
            "exact rank-sum test limited to {EXACT_LIMIT} observations, got {total}"
        )));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("rank-sum test requires finite values".into()));
    }
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..m].iter().sum();
    let (mf, nf, nn) = (m as f64, n as f64, total as f64);
    let mu = mf * (nn + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = if total > 1 {
        mf * nf / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)))
    } else {
        0.0
    };
    let sd = var.max(0.0).sqrt();
    let dev = w - mu;

    match mode {
        WilcoxonMode::Exact => {
            let z = if sd > 0.0 { dev / sd } else { 0.0 };
            let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
            Ok(TestResult {
                statistic: z,
                p_value: exact_p(&doubled, m),
                method: TestMethod::WilcoxonExact,
            })
        }
        WilcoxonMode::Approx { continuity } => {
            if sd == 0.0 {
                return Ok(TestResult {
                    statistic: 0.0,
                    p_value: 1.0,
                    method: TestMethod::WilcoxonApprox,
                });
            }
            let corrected = if continuity {
                dev.signum() * (dev.abs() - 0.5).max(0.0)
            } else {
                dev
            };
            let z = corrected / sd;
            Ok(TestResult {
                statistic: z,
                p_value: two_sided_normal_p(z),
                method: TestMethod::WilcoxonApprox,
            })
        }
    }
}

/// Two-sided exact p-value. `doubled` holds twice the mid-rank of every
/// pooled observation (integers); the first `m` belong to the first sample.
fn exact_p(doubled: &[usize], m: usize) -> f64 {
    let total_n = doubled.len();
    let max_sum: usize = doubled.iter().sum();
    // counts[j][s]: number of j-subsets of the items seen so far with doubled rank sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; m + 1];
    counts[0][0] = 1;
    for &r in doubled {
        for j in (1..=m).rev() {
            let (lower, upper) = counts.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let centre = (m * (total_n + 1)) as i64;
    let observed: usize = doubled[..m].iter().sum();
    let obs_dev = (observed as i64 - centre).abs();
    let mut extreme = 0u64;
    let mut all = 0u64;
    for (s, &c) in counts[m].iter().enumerate() {
        all += c;
        if (s as i64 - centre).abs() >= obs_dev {
            extreme += c;
        }
    }
    clean_p(extreme as f64 / all as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples_exact() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], WilcoxonMode::Exact).unwrap();
        assert!((r.p_value - 0.1).abs() < 1e-15);
        assert!(r.statistic < 0.0);
    }

    #[test]
    fn separated_triples_approx_without_correction() {
        let r = wilcoxon_rank_sum(
            &[1.0, 2.0, 3.0],
            &[4.0, 5.0, 6.0],
            WilcoxonMode::Approx { continuity: false },
        )
        .unwrap();
        assert!((r.statistic - (-1.9640)).abs() < 5e-5, "{}", r.statistic);
    }

    #[test]
    fn identical_samples_are_null() {
        for mode in [WilcoxonMode::Exact, WilcoxonMode::default()] {
            let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], mode).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert_eq!(r.p_value, 1.0);
        }
    }

    #[test]
    fn errors() {
        assert!(wilcoxon_rank_sum(&[], &[1.0], WilcoxonMode::Exact).is_err());
        let big: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(wilcoxon_rank_sum(&big, &big[..6], WilcoxonMode::Exact).is_err());
        assert!(wilcoxon_rank_sum(&big, &big[..6], WilcoxonMode::default()).is_ok());
    }

    #[test]
    fn huge_separation_reports_zero_p() {
        let a: Vec<f64> = (0..3000).map(|i| (i % 2) as f64).collect();
        let b: Vec<f64> = (0..3000).map(|i| 3.0 + (i % 2) as f64).collect();
        let r = wilcoxon_rank_sum(&a, &b, WilcoxonMode::default()).unwrap();
        assert_eq!(r.p_value, 0.0);
    }
}
