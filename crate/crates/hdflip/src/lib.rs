//! File formats, simulation harness and command-line front end for
//! [`hdflip_core`].
//!
//! Datasets are read from CSV ([`io::load_dataset`]); statistic matrices and
//! Multisplit p-value tables are written as CSV with 10 significant digits;
//! single results are JSON. [`harness::run_experiment`] reproduces FWER and
//! power simulations from an [`config::ExperimentConfig`].

pub mod config;
pub mod error;
pub mod harness;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentReport};
