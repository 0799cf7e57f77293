//! Bayesian dynamic calibration of quadratic instruments.
//!
//! Drifting calibration curves are tracked with a dynamic linear regression
//! filter, unknown references are recovered by quadratic inverse prediction,
//! and uncertainty about the filter variances is integrated out by sampling
//! importance resampling. Classical static estimators, synthetic data
//! generators and a Monte Carlo harness are included for comparison.

pub mod campaign;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod dlrm;
pub mod error;
pub mod inverse;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scenarios;
pub mod simgen;
pub mod sir;
pub mod static_calib;
pub mod stats;

pub use error::{Error, Result};
