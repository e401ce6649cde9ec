use thiserror::Error;

use crate::contour::CoupledCoefficients;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("grid has {n_r} points, cannot hold {bands} orthonormal bands")]
    GridTooSmall { n_r: usize, bands: usize },

    #[error("non-positive band gap {0}")]
    NonPositiveGap(f64),

    #[error("{what}: size {size} exceeds dense guard {limit}")]
    DenseGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("singular matrix: pivot {pivot} has magnitude {magnitude:e}")]
    Singular { pivot: usize, magnitude: f64 },

    #[error("{0} did not converge within the iteration cap")]
    NoConvergence(&'static str),

    #[error("matrix is not {expected}: extreme eigenvalue {eigenvalue:e}")]
    Definiteness {
        expected: &'static str,
        eigenvalue: f64,
    },

    #[error("elliptic modulus {0} outside [0, 1)")]
    ModulusOutOfRange(f64),

    #[error("contour degeneracy: {0}")]
    ContourDegenerate(String),

    #[error("contour bypassed (Q/q ~ 1): use the direct sum")]
    ContourBypassed,

    #[error("quadrature did not reach the threshold with {nodes} nodes (estimate {est_rel_error:e})")]
    QuadratureNotConverged {
        nodes: usize,
        est_rel_error: f64,
        best: Box<CoupledCoefficients>,
    },

    #[error("wavefunction file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
