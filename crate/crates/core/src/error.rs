use thiserror::Error;

/// Errors produced by the geometry, dynamics and spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("field evaluation failed for {what} at x = {x:?}")]
    FieldEvaluation { what: String, x: Vec<f64> },

    #[error("not a Randers structure at x = {x:?}: |beta| = {norm} (limit {limit})")]
    NotRanders { x: Vec<f64>, norm: f64, limit: f64 },

    #[error("metric a(x) is not positive definite at x = {x:?} (min eigenvalue {min_eigenvalue})")]
    MetricNotPositive { x: Vec<f64>, min_eigenvalue: f64 },

    #[error("{what} is not positive definite (min eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("the zero vector is not allowed for {what}")]
    ZeroVector { what: String },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("metrics of the composed factors differ by {difference:e} at x = {x:?}")]
    MetricMismatch { x: Vec<f64>, difference: f64 },

    #[error("operators do not commute: commutator norm {norm:e}")]
    NonCommuting { norm: f64 },

    #[error("operator is not Hermitian: residual {residual:e}")]
    NotHermitian { residual: f64 },

    #[error("momentum shell |k| = {k0} is empty on a grid of size {n}")]
    EmptyShell { k0: usize, n: usize },

    #[error("weight vanishes identically on the integration domain")]
    ZeroWeight,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dimension(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }
}
