//! Command-line driver for tensor-ring density estimation.
//!
//! Exit codes: 0 on success, 1 on runtime or numeric failure, 2 on usage or
//! configuration errors.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use cli::{Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Sizes the global rayon pool; `None` keeps the default of one worker per
/// core.
pub fn init_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    commands::dispatch(cli.command)
}
