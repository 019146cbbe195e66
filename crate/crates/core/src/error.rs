use std::io;

/// Errors raised by the laboratory.
///
/// Each variant maps onto one process exit code through [`Error::exit_code`],
/// so the command-line front end never has to inspect message text.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input: bad family parameters, dimension mismatch, degenerate sets.
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested law is well formed but does not define a probability
    /// measure (e.g. a radial density that is not integrable).
    #[error("model error: {0}")]
    Model(String),

    /// An analytic backend was requested for a family that has none.
    #[error("no analytic formula for {family}; use {fallback}")]
    Capability { family: String, fallback: String },

    /// A quantity exceeds the desk-scale limits.
    #[error("desk-scale cap exceeded: {what} requires {required}, cap is {cap}")]
    DeskCap {
        what: String,
        required: f64,
        cap: f64,
    },

    /// An operation precondition does not hold (and cannot be forced).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Empirical covariance too close to singular for whitening.
    #[error(
        "empirical covariance is singular (smallest eigenvalue {min_eigenvalue:.3e} \
         does not exceed the ridge {ridge:.3e}); add a ridge term larger than the smallest eigenvalue"
    )]
    Singular { min_eigenvalue: f64, ridge: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code: 2 validation-type, 3 desk-cap refusal, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DeskCap { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
