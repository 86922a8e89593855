//! tke-forge: a turbulence-regression toolkit.
//!
//! The crate computes turbulent kinetic energy (TKE) from 10 Hz
//! sonic-anemometer wind series, screens its correlation against multi-height
//! thermocouple temperatures, and predicts the TKE moving average with six
//! regression models implemented from scratch behind one fit/predict
//! contract:
//!
//! * inverse-distance-weighted k-nearest neighbors
//! * random forest of variance-reduction trees over bootstrap resamples
//! * gradient boosting with shrinkage
//! * second-order boosting with l1/l2-regularized leaf weights
//! * Gaussian process regression (RBF + white + rational-quadratic kernel)
//!   trained by maximizing the log marginal likelihood
//! * a multilayer perceptron trained with Adam and an l1 weight penalty
//!
//! Start with the runnable examples (`cargo run --example full_pipeline`),
//! or with [`pipeline::run`] for the end-to-end workflow. The `tke-forge`
//! binary exposes the same workflow as `run`, `synth` and `sweep`
//! subcommands.

pub mod error;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod stats;
pub mod synth;
pub mod turbulence;

mod seed;

pub use error::{Error, Result};
