//! Command-line front end for `povm-coherence`.
//!
//! Every subcommand prints one JSON document on stdout. Exit codes: 0 on
//! success, 1 when an input fails validation, 2 on numerical failure, 3 on
//! usage or configuration errors.

use std::ffi::OsString;

use serde_json::json;
use thiserror::Error;

pub mod commands;
pub mod io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] povm_coherence::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Parse(_) => EXIT_VALIDATION,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(povm_coherence::Error::ConfigInvalid(_)) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_VALIDATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "Io",
            CliError::Parse(_) => "ParseError",
            CliError::Usage(_) => "Usage",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let residual = match self {
            CliError::Core(e) => e.residual(),
            _ => None,
        };
        json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.to_string(),
            "residual": residual,
            "exit_code": self.exit_code(),
        })
    }
}

/// Exit code and the text destined for stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match commands::dispatch(argv) {
        Ok(commands::Reply::Json(value)) => Outcome {
            code: EXIT_OK,
            stdout: format!("{}\n", io::to_json(&value)),
            stderr: String::new(),
        },
        Ok(commands::Reply::Failed(value, msg)) => Outcome {
            code: EXIT_VALIDATION,
            stdout: format!("{}\n", io::to_json(&value)),
            stderr: format!("{msg}\n"),
        },
        Ok(commands::Reply::Text(text)) => Outcome {
            code: EXIT_OK,
            stdout: text,
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: e.exit_code(),
            stdout: format!("{}\n", io::to_json(&e.to_json())),
            stderr: format!("error: {e}\n"),
        },
    }
}
