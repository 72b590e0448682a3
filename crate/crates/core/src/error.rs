//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error at representation point {point}: {message}")]
    Domain { point: usize, message: String },

    #[error("stencil exceeds grid: {0}")]
    Boundary(String),

    #[error(
        "singular resolvent at representation point {point} (x index {x_index}): \
         smallest singular value {sigma_min:.3e}"
    )]
    SingularResolvent {
        point: usize,
        x_index: usize,
        sigma_min: f64,
    },

    #[error("symbol is not elliptic: {0}")]
    NotElliptic(String),

    #[error(
        "spectrum too close to contour at point {point}: margin {margin:.3e} < {required:.3e}"
    )]
    ContourViolation {
        point: usize,
        margin: f64,
        required: f64,
    },

    #[error("decay contract violated: {0}")]
    DecayContract(String),

    #[error("symbol not positive definite at point {point}: smallest eigenvalue {eigenvalue:.3e}")]
    Positivity { point: usize, eigenvalue: f64 },

    #[error("numerical accuracy failure: {0}")]
    NumericalAccuracy(String),

    #[error("instability in mode (point {point}, index {index}): |coefficient| = {magnitude:.3e}")]
    Instability {
        point: usize,
        index: usize,
        magnitude: f64,
    },

    #[error("stiffness: {0}")]
    Stiffness(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
