//! Scenario-driven experiments combining a main time series with context
//! attributes and collaborative sources.
//!
//! A run loads per-location datasets ([`dataset`]), expands a scenario matrix
//! ([`scenario`]), assembles and windows each scenario ([`window`]), trains the
//! four regression learners ([`learners`]), measures the test predictions
//! ([`metrics`]) and writes ranked reports ([`reporting`]). Parameter sweeps
//! live in [`grid`]; the scenario loop itself is in [`runner`].

pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod grid;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod reporting;
pub mod runner;
pub mod scenario;
pub mod synthetic;
pub mod window;

pub use error::{Error, Result};
