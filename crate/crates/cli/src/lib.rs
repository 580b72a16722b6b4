//! `bindcap` command-line front end.
//!
//! Every output starts with a manifest block of `# key=value` lines. The
//! `# args=` line holds the exact argument list, so `bindcap replay FILE`
//! regenerates the output byte for byte. Wall-clock duration goes to stderr
//! only, keeping outputs reproducible.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical or
//! consistency failure (including optimizer non-convergence).

pub mod args;
mod commands;
pub mod report;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

use args::{Cli, Command, Format};
use report::Report;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] bindcap::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(bindcap::Error::Consistency(_)) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

/// A finished command: its report, where to send it, and the exit status.
pub(crate) struct Outcome {
    pub report: Report,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub exit: u8,
    /// Human-readable warning printed to stderr.
    pub warnings: Vec<String>,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let started = Instant::now();
    let recorded = recorded_args(&argv[1..]);
    let result = match cli.command {
        Command::Capacity(a) => commands::capacity(&a, &recorded),
        Command::Sweep(a) => commands::sweep(&a, &recorded),
        Command::Simulate(a) => commands::simulate(&a, &recorded),
        Command::Scaling(a) => commands::scaling(&a, &recorded),
        Command::Replay(a) => {
            return match commands::replay_args(&a) {
                Ok(args) => run(&args, out, err),
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    e.exit_code()
                }
            };
        }
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let text = outcome.report.render(outcome.format);
    let written = match &outcome.output {
        Some(path) => std::fs::write(path, &text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let _ = writeln!(err, "# duration_ms={}", started.elapsed().as_millis());
    outcome.exit
}

/// The argument list stored in manifests: everything except the output
/// destination, so a replay can write elsewhere.
fn recorded_args(args: &[String]) -> Vec<String> {
    let mut kept = Vec::with_capacity(args.len());
    let mut skip_next = false;
    for a in args {
        if skip_next {
            skip_next = false;
            continue;
        }
        if a == "--output" || a == "-o" {
            skip_next = true;
        } else if !(a.starts_with("--output=") || (a.starts_with("-o") && a.len() > 2 && !a.starts_with("--"))) {
            kept.push(a.clone());
        }
    }
    kept
}
