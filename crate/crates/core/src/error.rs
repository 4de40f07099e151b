//! Error type shared by every module.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, LbmError>;

/// Failures raised by scheme construction, parameter derivation, analysis and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LbmError {
    #[error("unknown scheme `{0}` (expected D2Q9, D2Q13 or D2Q17)")]
    UnknownScheme(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nonpositive density {rho} in equilibrium evaluation")]
    NonPositiveDensity { rho: f64 },

    #[error("constraint violation on `{name}`: {detail}")]
    ConstraintViolation { name: String, detail: String },

    #[error("eigensolver did not converge after {iterations} iterations ({context})")]
    NoConvergence { iterations: usize, context: String },

    #[error("instability at step {step}: {detail}")]
    Instability { step: usize, detail: String },

    #[error("linearly unstable: {0}")]
    LinearInstability(String),

    #[error("configuration error:\n{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("i/o error: {0}")]
    Io(String),
}

/// One configuration problem, with the 1-based line it was found on (0 when global).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

fn format_config_errors(errs: &[ConfigError]) -> String {
    errs.iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl LbmError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LbmError::Config(_) | LbmError::UnknownScheme(_) | LbmError::InvalidArgument(_) => 2,
            LbmError::NonPositiveDensity { .. } | LbmError::Instability { .. } | LbmError::LinearInstability(_) => 3,
            LbmError::ConstraintViolation { .. } => 4,
            LbmError::NoConvergence { .. } | LbmError::Io(_) => 1,
        }
    }

    pub(crate) fn violation(name: impl Into<String>, detail: impl Into<String>) -> Self {
        LbmError::ConstraintViolation {
            name: name.into(),
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for LbmError {
    fn from(e: std::io::Error) -> Self {
        LbmError::Io(e.to_string())
    }
}
