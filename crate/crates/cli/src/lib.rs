//! Command-line front end: scenario resolution and the `dist`, `simulate`,
//! `compare` and `converge` commands.

pub mod commands;
pub mod scenario;

use std::fmt;

pub use commands::{cmd_compare, cmd_converge, cmd_dist, cmd_simulate, CompareArgs, ConvergeRow};
pub use scenario::{ScenarioArgs, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or unreadable input. Exit code 1.
    Validation,
    /// Inputs that cannot be compared with each other. Exit code 2.
    Incompatible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(msg: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: msg.to_string(),
        }
    }

    pub fn incompatible(msg: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Incompatible,
            message: msg.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Incompatible => 2,
        }
    }
}

impl fmt::Display for CliError {
    /// `error kind=<kind> code=<n>: <message>`, one line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Incompatible => "incompatible",
        };
        write!(
            f,
            "error kind={kind} code={}: {}",
            self.exit_code(),
            self.message.replace('\n', " ")
        )
    }
}

impl std::error::Error for CliError {}
