use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum HpeError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("degenerate constraint: sum of cbar^2/d = {0:e}")]
    DegenerateConstraint(f64),

    #[error("pressure is undefined at the zero wavevector")]
    ZeroWavevector,

    #[error("numerical blow-up at t = {t}: largest coefficient |a| = {magnitude:e} at (m={m}, n={n}, k={k}, c={c})")]
    BlowUp {
        t: f64,
        m: i64,
        n: i64,
        k: usize,
        c: usize,
        magnitude: f64,
    },

    #[error("{method} did not converge after {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        last: f64,
        residuals: Vec<f64>,
    },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("incompatible problems: {0}")]
    IncompatibleProblem(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HpeError {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        HpeError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HpeError>;
