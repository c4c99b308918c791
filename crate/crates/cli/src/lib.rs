//! Batch driver of the reduced-order and full-field solvers: configuration
//! parsing, RVE input and generation, run orchestration, on-disk artifacts
//! and run comparison.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod io;
pub mod rve;
pub mod run;

pub use compare::{compare, CompareReport};
pub use config::{parse_config, parse_config_str, Mode, RunConfig};
pub use error::{CliError, Result};
pub use run::{run, RunSummary};
