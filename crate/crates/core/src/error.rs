use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent {value}: {constraint}")]
    InvalidExponent { value: f64, constraint: &'static str },

    #[error("invalid parameter {name} = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e} below -1e-10)")]
    NotPsd { eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solution blew up at step {step} (t = {time:.6}): max|u| = {max_abs:.3e}")]
    BlowUp { step: usize, time: f64, max_abs: f64 },

    #[error("linear solve did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("value {value:.6} outside the xi-grid range [{lo:.6}, {hi:.6}]; rebuild the grid to cover the trajectory")]
    XiRange { value: f64, lo: f64, hi: f64 },

    #[error("unsupported exponent p = {p}: {constraint}")]
    UnsupportedExponent { p: f64, constraint: &'static str },

    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),

    #[error("non-finite value produced by {context}")]
    NonFinite { context: &'static str },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
