//! Experiment driver for `qsl-core`: configuration, orchestration, convergence fits and output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod fit;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use config::{Cli, RunConfig};
use error::RunError;

/// Worker-count override; the default is the available parallelism.
pub const WORKERS_ENV: &str = "QSL_WORKERS";

pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Resolve, execute and emit. Returns the written paths and whether every row succeeded.
pub fn run_config(cfg: &RunConfig) -> Result<(Vec<PathBuf>, bool), RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| RunError::Output { path: PathBuf::new(), message: e.to_string() })?;
    let outcome = pool.install(|| commands::execute(cfg))?;
    let paths = output::emit(cfg, &outcome)?;
    for f in &outcome.failures {
        eprintln!("qsl: {f}");
    }
    Ok((paths, outcome.success()))
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, params) = cli.command.split();
    let result = RunConfig::resolve(kind, params).map_err(RunError::from).and_then(|cfg| run_config(&cfg));
    match result {
        Ok((paths, ok)) => {
            for p in paths {
                println!("{}", p.display());
            }
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("qsl: {e}");
            e.exit_code()
        }
    }
}
