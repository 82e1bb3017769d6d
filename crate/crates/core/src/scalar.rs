//! Floating-point abstraction shared by every numerical routine in the crate.
//!
//! Learners, selectors and metrics are written once against [`Scalar`] and
//! instantiated for `f64` (the default used by the CLI and artifacts) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for the finite constants used in this crate.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A convergence tolerance no tighter than the type can resolve.
    fn tolerance(requested: f64) -> Self {
        let floor = Self::epsilon().to_f64_lossy() * 1e3;
        Self::lit(requested.max(floor))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically safe logistic function.
pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
pub fn softplus<F: Scalar>(z: F) -> F {
    if z > F::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        for &z in &[-800.0f64, -3.0, 0.0, 2.5, 800.0] {
            let s = sigmoid(z);
            assert!((0.0..=1.0).contains(&s));
            assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0f32), 0.5);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &z in &[-20.0f64, -1.0, 0.0, 1.0, 20.0] {
            assert!((softplus(z) - (1.0 + z.exp()).ln()).abs() < 1e-12);
        }
        assert!(softplus(1000.0f64).is_finite());
    }

    #[test]
    fn tolerance_respects_precision() {
        assert_eq!(<f64 as Scalar>::tolerance(1e-8), 1e-8);
        assert!(<f32 as Scalar>::tolerance(1e-8) > 1e-5);
    }
}
