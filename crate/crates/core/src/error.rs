use thiserror::Error;

use crate::solver::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("evaluation error: {what} at {location}")]
    Evaluation { what: String, location: String },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    LinearNonConvergence { iterations: usize, residual: f64 },

    #[error("nonlinear solver did not converge: {reason} (residual {:e})", report.final_residual)]
    NonConvergence { reason: String, report: Box<SolveReport> },

    #[error("time step {step} failed: {source}")]
    Evolution { step: usize, source: Box<Error> },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
