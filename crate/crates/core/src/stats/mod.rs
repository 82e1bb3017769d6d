//! Hypothesis tests and interval estimates used by feature filtering and
//! classifier comparison.

mod anova;
mod ci;
pub mod quadrature;
mod rank;
mod spearman;
pub mod studentized_range;
mod wilcoxon;

pub use anova::{anova_tukey, PairwiseComparison};
pub use ci::{ci95, mean};
pub use rank::midranks;
pub use spearman::spearman;
pub use wilcoxon::{wilcoxon_rank_sum, WilcoxonMode};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WilcoxonExact,
    WilcoxonApprox,
    Spearman,
    Anova,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// z for the rank-sum test, rho for Spearman, F for ANOVA.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// p-values this small are indistinguishable from zero in double precision
/// tail computations and are reported as exactly 0.
pub const P_UNDERFLOW: f64 = 1e-300;

pub(crate) fn clean_p(p: f64) -> f64 {
    if p < P_UNDERFLOW {
        0.0
    } else {
        p.min(1.0)
    }
}

/// Two-sided normal tail probability `P(|Z| >= |z|)`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    clean_p(statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2))
}
