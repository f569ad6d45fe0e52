use thiserror::Error;

/// Errors raised by the solvers, the exponent calculus and config parsing.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input (dimension mismatch, bad range).
    #[error("invalid input: {0}")]
    Input(String),

    /// Evaluation outside the domain of a map (e.g. gradient of F at 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration key could not be parsed or is missing.
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    /// A theorem-level admissibility gate was violated (p-gate, weight range, s in I).
    #[error("gate violation: {0}")]
    Gate(String),

    /// An iterative solver did not reach its tolerance. Carries the last
    /// iterate (possibly empty) for diagnostics.
    #[error("convergence failure: {message} (after {iterations} iterations, residual {residual:e})")]
    Convergence {
        message: String,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Input(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Convergence { .. } | Error::Domain(_) => 3,
            Error::Gate(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Domain(_) => "domain",
            Error::Config { .. } => "config",
            Error::Gate(_) => "gate",
            Error::Convergence { .. } => "convergence",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
