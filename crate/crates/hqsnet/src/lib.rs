//! Host-side tooling for `hqsnet-core`: binary file formats, experiment
//! configuration, phantom datasets, the comparison harness and the CLI.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod harness;
pub mod io;

pub use error::{HarnessError, Result};
