//! Round-robin (chained-equations) imputation of numeric tables.
//!
//! The crate covers the data model and table I/O ([`data`]), six regression
//! strategies ([`regressors`]), the iterative engine ([`roundrobin`]), ordering
//! and execution of overlapping subsets ([`orderer`]), quality measures
//! ([`evaluation`]), synthetic data with controlled missingness ([`synth`]),
//! and the command-line front end ([`cli`]) with its resolved run
//! configuration ([`config`]).

pub mod artifact;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod orderer;
pub mod regressors;
pub mod rng;
pub mod roundrobin;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
