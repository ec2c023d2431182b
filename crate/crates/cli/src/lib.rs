//! Batch front end for `nodal-core`.
//!
//! Exit codes: 0 success, 1 user or input error, 2 mathematical rejection
//! (a run classified `Rejected`, a flagged sweep row, a failed certificate),
//! 3 numerical failure (no convergence).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod artifacts;
pub mod commands;
pub mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERICAL, message: message.into() }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::usage(format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "nodal", version, about = "Sign-changing solutions of repulsive coupled Schrödinger systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run the descent flow for every configured seed.
    Solve { config: PathBuf },
    /// Follow the solution along the configured coupling values.
    Sweep { config: PathBuf },
    /// Re-check a solution file against the certificate battery.
    Verify {
        solution: PathBuf,
        /// Defaults to `config.toml` next to the solution.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a plot-ready table of a solution file.
    Export {
        solution: PathBuf,
        /// `csv` or `tsv`.
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `export.<format>` next to the solution.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse arguments, dispatch, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Solve { config } => config::load(&config).and_then(|c| commands::cmd_solve(&c)).map(|o| {
            for line in &o.lines {
                println!("{line}");
            }
            o.code
        }),
        Cmd::Sweep { config } => config::load(&config).and_then(|c| commands::cmd_sweep(&c)).map(|o| {
            for line in &o.lines {
                println!("{line}");
            }
            o.code
        }),
        Cmd::Verify { solution, config } => commands::cmd_verify(&solution, config.as_deref()).map(|v| {
            for c in &v.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if v.passed {
                EXIT_OK
            } else {
                EXIT_REJECTED
            }
        }),
        Cmd::Export { solution, format, config, out } => {
            commands::cmd_export(&solution, config.as_deref(), &format, out.as_deref()).map(|p| {
                println!("{}", p.display());
                EXIT_OK
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.code
    })
}
