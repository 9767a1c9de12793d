//! Error type and exit-code contract.

use gmn_core::lattice::LatticeError;
use gmn_core::modeldata::ModelError;
use gmn_core::semiflat::GeomError;
use thiserror::Error;

/// Exit code when every check passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when a certificate fails.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for invalid models or input.
pub const EXIT_INVALID: i32 = 2;

/// Errors of the command-line driver.
#[derive(Debug, Error)]
pub enum CliError {
    /// The model violates a standing assumption.
    #[error("invalid model ({assumption}): {detail}")]
    Model {
        /// Assumption name.
        assumption: String,
        /// Detail.
        detail: String,
    },
    /// Malformed JSON or schema mismatch.
    #[error("{path}: {message}\n{context}")]
    Parse {
        /// File.
        path: String,
        /// Parser message.
        message: String,
        /// Offending line with a caret.
        context: String,
    },
    /// Schema violation found after parsing.
    #[error("schema: {0}")]
    Schema(String),
    /// Bad command-line value.
    #[error("usage: {0}")]
    Usage(String),
    /// Invalid lattice input.
    #[error("invalid lattice: {0}")]
    Lattice(#[from] LatticeError),
    /// File system error.
    #[error("{path}: {message}")]
    Io {
        /// File.
        path: String,
        /// Message.
        message: String,
    },
    /// Evaluation failed.
    #[error("evaluation failed: {0}")]
    Eval(String),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model { assumption: String::from(e.assumption()), detail: e.to_string() }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::Eval(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io { path: String::from("csv"), message: e.to_string() }
    }
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Eval(_) => EXIT_FAIL,
            _ => EXIT_INVALID,
        }
    }
}
