//! Clustering observations by the regression relationship between a
//! multivariate (or functional) response and high-dimensional predictors.
//!
//! The crate fits finite mixtures of Gaussian regressions with diagonal
//! covariances by a generalized EM algorithm, discovers candidate variable
//! supports along an l1 (or group-l1) path over a data-driven grid, refits
//! each support by maximum likelihood or by rank-constrained regression, and
//! selects one model from the collection by the slope heuristic (with BIC and
//! a simulation oracle as comparators). Functional data enter through an
//! orthogonal discrete wavelet transform.

pub mod error;
pub mod evalsim;
pub mod gem;
pub mod grid;
pub mod model;
pub mod pipeline;
pub mod rank;
pub mod selection;
pub mod wavelet;

pub use error::{Error, Result};
pub use model::{Dataset, MixtureParams, ModelSpec, Responsibilities, SparsityPattern};
