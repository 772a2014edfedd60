//! Experiment harness for the `bdris-core` simulator: configuration files,
//! Monte-Carlo runs, CSV results, summaries, SVG plots and the `bdris` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod summary;

pub use config::{parse_config, ExperimentConfig, Framework};
pub use error::{ConfigIssue, HarnessError, Result};
pub use experiment::{run_experiment, ResultsTable, Row, RowStatus};
pub use summary::{summarize, Summary, SummaryRow};
