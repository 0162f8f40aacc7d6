//! The `mhn` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 empty result,
//! 3 numeric failure.

mod args;
mod commands;
mod manifest;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use commands::RunConfig;
pub use manifest::{FileDigest, RunManifest, MANIFEST_FORMAT};

use crate::diffgrad::TensorError;
use crate::evalkit::EvalError;
use crate::hetgraph::GraphError;
use crate::metapath::MetapathError;
use crate::mhn::ModelError;
use crate::training::TrainError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_EMPTY: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Empty(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metapath(#[from] MetapathError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn is_numeric(e: &ModelError) -> bool {
    matches!(e, ModelError::Tensor(TensorError::NonFinite { .. }))
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Empty(_) | CliError::Eval(EvalError::Empty(_)) => EXIT_EMPTY,
            CliError::Train(TrainError::Diverged { .. }) => EXIT_NUMERIC,
            CliError::Train(TrainError::Model(e)) | CliError::Model(e) if is_numeric(e) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.workers);
            return EXIT_INPUT;
        }
    };
    match pool.install(|| commands::dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
