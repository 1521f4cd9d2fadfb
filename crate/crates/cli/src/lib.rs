//! Command-line front end: `optimize`, `audit`, `block-report`, `stats` and
//! `fetch` over NDJSON corpora or a live node.
//!
//! Every command writes into a staging directory under `--out` and moves the
//! finished files into place only on success. Exit codes are given by
//! [`CliError::exit_code`].

pub mod commands;
pub mod config;
mod error;
pub mod input;
pub mod output;

pub use commands::{run, run_with_client};
pub use config::{Cli, RunConfig, RPC_URL_ENV};
pub use error::CliError;
