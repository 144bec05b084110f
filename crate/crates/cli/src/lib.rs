//! Experiment harness: datasets, Monte Carlo simulation, utility metrics,
//! closed-form variance tables and the channel audit.

pub mod audit;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod tables;

pub use error::{HarnessError, Result};
