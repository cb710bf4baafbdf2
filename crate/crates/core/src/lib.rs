//! Benchmark framework for surrogate models of coupled ODE systems.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod odegen;
pub mod report;
pub mod surrogates;
pub mod tabular;

pub use error::{Error, Result};
