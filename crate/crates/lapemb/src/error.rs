use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{label}:{line}: {msg}")]
    Parse {
        label: String,
        line: usize,
        msg: String,
    },

    #[error("geometry is not a single connected component (component sizes: {sizes:?})")]
    Disconnected { sizes: Vec<usize> },

    #[error("points {a} and {b} coincide within {tol:e}")]
    DuplicatePoints { a: usize, b: usize, tol: f64 },

    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver did not converge: {converged} of {requested} pairs at tolerance {tol:e} (worst residual {worst_residual:e})")]
    NoConvergence {
        requested: usize,
        converged: usize,
        tol: f64,
        worst_residual: f64,
    },

    #[error("operator is not positive semidefinite: Ritz value {ritz:e} below -1e-9 * {scale:e}")]
    NotPositiveSemidefinite { ritz: f64, scale: f64 },

    #[error("degenerate-group mismatch: group {index} has {size_a} modes in the first spectrum but {size_b} in the second")]
    GroupMismatch {
        index: usize,
        size_a: usize,
        size_b: usize,
    },
}
