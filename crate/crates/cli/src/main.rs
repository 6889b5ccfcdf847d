mod commands;
mod config;
mod files;
mod validate;

use std::path::Path;
use std::process::ExitCode;

use babenko_core::WaveError;
use clap::Parser;
use serde::Serialize;

use crate::config::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] WaveError),
    #[error("validation failed: {}", .0.join(", "))]
    ValidationFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Solver(WaveError::NoVerticalTangent(_)) => 4,
            CliError::Solver(WaveError::Io(_)) => 3,
            CliError::Solver(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 3,
        }
    }

    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Solver(e) => e.reason(),
            CliError::ValidationFailed(_) => "validation-failed",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    version: u32,
    reason: &'a str,
    message: String,
    exit_code: u8,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failed_checks: Vec<String>,
}

fn write_error(out: &Path, err: &CliError) {
    let rec = ErrorRecord {
        version: files::FORMAT_VERSION,
        reason: err.reason(),
        message: err.to_string(),
        exit_code: err.exit_code(),
        failed_checks: match err {
            CliError::ValidationFailed(v) => v.clone(),
            _ => Vec::new(),
        },
    };
    if std::fs::create_dir_all(out).is_ok() {
        // Best effort: the exit code already carries the outcome.
        let _ = files::write_json(&out.join("error.json"), &rec);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let resolved = match config::resolve(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match commands::run(&resolved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.reason());
            write_error(&resolved.out, &e);
            ExitCode::from(e.exit_code())
        }
    }
}
