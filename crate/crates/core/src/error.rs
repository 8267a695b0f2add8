use nalgebra::DVector;
use thiserror::Error;

/// Diagnostics carried by a capped-CG run that hit its iteration cap.
#[derive(Debug, Clone)]
pub struct CgStall {
    pub iters: usize,
    pub hv_products: usize,
    /// Last CG iterate `y^j`.
    pub best_y: DVector<f64>,
    /// `||r^j|| / ||r^0||` at the moment the cap was hit.
    pub residual_ratio: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite {what} at x = {x:?}")]
    NonFinite { what: &'static str, x: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate step: ||y - x|| = {0:e}")]
    DegenerateStep(f64),

    #[error("capped CG reached {} iterations without a certificate", .0.iters)]
    CgStalled(Box<CgStall>),

    #[error("line search exceeded {0} backtracks")]
    LineSearchFailed(usize),

    #[error("dense oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that stem from bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::DimensionMismatch { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
