//! Regression toolkit for predicting reservoir rock properties after salt
//! removal: core-sample datasets, linear/tree/kernel/neural regressors,
//! repeated cross-validation, a material-balance porosity model and the
//! two-stage prediction pipeline used by the `desalt` command line tool.

// Validation is written as `!(x > 0.0)` so that NaN is rejected alongside
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod model_selection;
pub mod num;
pub mod physics;
pub mod pipeline;
pub mod svr;

pub use error::{Error, Result};
pub use num::Real;

pub type LinearModelF64 = linear::LinearModel<f64>;
pub type RegressionTreeF64 = ensemble::RegressionTree<f64>;
pub type ForestModelF64 = ensemble::ForestModel<f64>;
pub type GbmModelF64 = ensemble::GbmModel<f64>;
pub type SvrModelF64 = svr::SvrModel<f64>;
pub type MlpModelF64 = mlp::MlpModel<f64>;
