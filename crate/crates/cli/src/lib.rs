//! Command-line front end: config parsing, figure-dataset sweeps, CSV
//! emission and the verification subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_fit, cmd_gamma, cmd_oracle_check, cmd_signal, cmd_sweep, plot_script, Output,
};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Runs `f` on a pool of `jobs` threads, or the global pool when `None`.
pub fn with_jobs<R: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> CliResult<R> + Send,
) -> CliResult<R> {
    match jobs {
        None => f(),
        Some(0) => Err(CliError::config("--jobs", "must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(f),
    }
}
