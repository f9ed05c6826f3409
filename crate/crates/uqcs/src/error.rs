//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any public operation in this crate.
#[derive(Debug, Error)]
pub enum UqcsError {
    #[error("non-square matrix: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix dimension {0} exceeds supported maximum {1}")]
    DimensionOverflow(usize, usize),

    #[error("matrix exponential out of documented range: ||scale*A|| = {norm:.3e}")]
    MatexpOverflow { norm: f64 },

    #[error("linear-algebra backend failure: {0}")]
    Lapack(String),

    #[error("eigensolver failed to converge: {0}")]
    Convergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible grid: {0}")]
    InfeasibleGrid(String),

    #[error("incomplete sample grid: {0}")]
    IncompleteGrid(String),

    #[error("dark state: identity-peak amplitude {amplitude:.3e} below floor {floor:.3e}")]
    DarkState { amplitude: f64, floor: f64 },

    #[error("degenerate-subspace tracking failure: gap {gap:.3e} closed at path step {step}")]
    GapClosure { gap: f64, step: usize },

    #[error("density matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("artifact version mismatch: manifest {manifest}, binary {binary}")]
    VersionMismatch { manifest: String, binary: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<ndarray_linalg::error::LinalgError> for UqcsError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        UqcsError::Lapack(e.to_string())
    }
}

impl From<serde_json::Error> for UqcsError {
    fn from(e: serde_json::Error) -> Self {
        UqcsError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, UqcsError>;
