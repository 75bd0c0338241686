//! Experiment harness for `fwboost`: dataset ingestion, synthetic streams,
//! baselines, progressive validation over seeds, and report emission.
//!
//! ```no_run
//! use fwboost_bench::{config::ExperimentConfig, runner::run_experiment};
//!
//! let cfg = ExperimentConfig::load("configs/synthetic_mixture.toml".as_ref()).unwrap();
//! let out = run_experiment(&cfg).unwrap();
//! println!("{}", fwboost_bench::report::to_markdown(&[out]));
//! ```

pub mod algorithms;
pub mod comparator;
pub mod config;
pub mod dataset;
pub mod fetch;
pub mod report;
pub mod runner;
pub mod tune;
