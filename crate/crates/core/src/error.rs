use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-Hermitian spectrum: imaginary residue {residue:e} exceeds {limit:e}")]
    NonHermitian { residue: f64, limit: f64 },
    #[error("projection did not converge up to alpha = {alpha_max} (test1 = {test1:e}, test2 = {test2:e})")]
    ProjectionNotConverged { alpha_max: usize, test1: f64, test2: f64 },
    #[error("moment E[xi^{order}] does not exist for this jump distribution")]
    MomentUndefined { order: f64 },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("root search failed: {0}")]
    RootSearch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
