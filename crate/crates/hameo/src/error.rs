//! Error taxonomy shared across the crate.
//!
//! The split mirrors how callers recover: configuration and range errors are
//! user input problems, contract errors are misuse of an operation's
//! preconditions, integration errors mean the numerics themselves gave up.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or rejected configuration input (unknown key, bad shape).
    #[error("config: {0}")]
    Config(String),

    /// A numeric parameter is outside its admissible range.
    #[error("range: {0}")]
    Range(String),

    /// A point or chart request outside the surface's valid domain.
    #[error("domain: {0}")]
    Domain(String),

    /// An operation's precondition does not hold for the given arguments.
    #[error("contract: {0}")]
    Contract(String),

    /// Normalization cannot be performed (e.g. support touches the boundary).
    #[error("normalization: {0}")]
    Normalization(String),

    /// The time integrator detected invalid state (step underflow, escape
    /// from the domain, non-finite coordinates).
    #[error("integration: {0}")]
    Integration(String),

    /// A search finished with an empty feasible set.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Expression-grammar parse failure, with a byte offset into the input.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to: usage/config problems
    /// exit 2, everything else (a failed check at runtime) exits 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Range(_) | Error::Parse { .. } | Error::Json(_) => 2,
            _ => 1,
        }
    }
}
