//! Quantitative lesion analysis for multiparametric prostate MRI.
//!
//! The crate covers the whole pipeline: per-sequence feature extraction from
//! an image and a lesion outline, assembly of the multiparametric feature
//! matrix, elastic-net penalised logistic regression over a lambda path,
//! stratified cross-validation with ROC analysis, and coefficient-based
//! feature ranking. A phantom generator produces synthetic cohorts with known
//! effects for end-to-end checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod imaging;
pub mod stats;

pub use error::{Error, Result};
pub mod cohort;
pub mod elasticnet;
pub mod evaluation;
pub mod features;
pub mod matrix;
pub mod synth;
