use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the spectral, PDE, HUM and moment solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no sign change of the characteristic function on ({lo}, {hi}) for index {index}")]
    BracketFailure { index: usize, lo: f64, hi: f64 },

    #[error("grid with {n_x} intervals resolves mode {index} with only {points_per_wavelength:.2} points per wavelength")]
    GridTooCoarse {
        n_x: usize,
        index: usize,
        points_per_wavelength: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular system at row {row} (pivot {pivot:e}); shift is likely an eigenvalue of the discrete operator")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("H^-1 pairing is not positive ({0:e}); shift lies below the bottom of the spectrum")]
    IndefiniteNorm(f64),

    #[error("conjugate gradient breakdown at iteration {iteration}: denominator {denominator:e}")]
    Breakdown { iteration: usize, denominator: f64 },

    #[error("Gram matrix condition estimate {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
