use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (alpha out of range, non-SPD matrix, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A contract violation at call time (point not interior, zero argument to
    /// a singular kernel, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The quadrature engine could not reach the requested tolerance.
    #[error("quadrature did not converge: {context} (value {value:.6e}, error estimate {error:.3e}, requested rel_tol {rel_tol:.1e})")]
    NonConvergence {
        context: String,
        value: f64,
        error: f64,
        rel_tol: f64,
    },

    /// A certification check ran to completion and failed.
    #[error("certification failed: {0}")]
    Certification(String),

    /// Malformed or schema-violating configuration input.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 schema, 3 numeric, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::NonConvergence { .. } => 3,
            _ => 1,
        }
    }
}
