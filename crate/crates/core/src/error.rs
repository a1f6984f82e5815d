use thiserror::Error;

/// Errors produced by the solvers and the configuration layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WignerError {
    /// A configuration value is missing, malformed or violates a cross-field constraint.
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// The configuration document could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// An operation was requested that the current state does not support,
    /// such as sampling a transition from a classical (scattering-free) stencil.
    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    /// The deterministic oracle only enumerates low expansion orders.
    #[error("unsupported expansion order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },

    /// The state became non-finite while integrating a trajectory.
    #[error("numerical overflow: non-finite state reached at t = {time}")]
    NumericalOverflow { time: f64 },

    /// A Monte Carlo estimate could not be formed.
    #[error("estimation failure: {0}")]
    Estimation(String),

    /// The phase-space grid carries no mass to resample from.
    #[error("cannot resample: {0}")]
    CannotResample(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl WignerError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        WignerError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the category of this error: 2 for configuration
    /// problems, 3 for numerical failures and 4 for estimation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            WignerError::Config { .. }
            | WignerError::Parse { .. }
            | WignerError::InvalidOperation(_)
            | WignerError::UnsupportedOrder { .. }
            | WignerError::Io(_) => 2,
            WignerError::NumericalOverflow { .. } => 3,
            WignerError::Estimation(_) | WignerError::CannotResample(_) => 4,
        }
    }
}

pub type Result<T, E = WignerError> = std::result::Result<T, E>;
