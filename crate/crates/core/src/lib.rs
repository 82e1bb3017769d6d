//! Early Parkinson's disease screening from patient-questionnaire data:
//! cohort handling, feature selection, four classifiers, nested
//! cross-validation and Bayesian hyperparameter tuning.
//!
//! Numerical code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cohort;
pub mod error;
pub mod eval;
pub mod learn;
pub mod linalg;
pub mod scalar;
pub mod seed;
pub mod select;
pub mod stats;
pub mod tune;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type LogisticModelF64 = learn::LogisticModel<f64>;
pub type LogisticModelF32 = learn::LogisticModel<f32>;
pub type ForestModelF64 = learn::ForestModel<f64>;
pub type ForestModelF32 = learn::ForestModel<f32>;
pub type BoostModelF64 = learn::BoostModel<f64>;
pub type BoostModelF32 = learn::BoostModel<f32>;
pub type SvmModelF64 = learn::SvmModel<f64>;
pub type SvmModelF32 = learn::SvmModel<f32>;
pub type ModelF64 = learn::Model<f64>;
pub type ModelF32 = learn::Model<f32>;
pub type SelectorF64 = select::Selector<f64>;
pub type SelectorF32 = select::Selector<f32>;
pub type PcaTransformF64 = select::PcaTransform<f64>;
pub type PcaTransformF32 = select::PcaTransform<f32>;
