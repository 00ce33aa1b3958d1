//! Ranking many candidate variables (genes) by their association with a
//! primary variable when latent factors confound the data.
//!
//! The data model is `Y = γ gᵀ + β Xᵀ + U Vᵀ + Σ E` with `Y` holding `N`
//! genes in rows and `n` subjects in columns. The main entry point is
//! [`pipeline::leapp`], which rotates the data so that the primary effect
//! lives in a single column, estimates the latent structure from the
//! remaining columns, and then detects associated genes as mean-shift
//! outliers in a robust regression. Baseline methods, a synthetic data
//! generator and evaluation metrics live alongside it.

// Negated float comparisons are used on purpose so that NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod crisscross;
pub mod dantzig;
pub mod error;
pub mod eval;
pub mod ipod;
mod linalg;
pub mod model;
pub mod pipeline;
pub mod rank_estimate;
pub mod rotation;
pub mod simgen;
pub mod sweep;

pub use error::{LeappError, Result};
pub use model::{validate, DataMatrix, GeneResult, LatentEstimate, SimTruth, StudyDesign};
pub use pipeline::{leapp, LeappConfig, LeappFit};
