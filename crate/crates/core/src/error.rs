//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A point passed to a window-bound operation lies outside the window.
    #[error("point ({x}, {y}) lies outside the window")]
    PointOutsideWindow { x: f64, y: f64 },

    /// Pattern operations that need a nearest neighbour require two atoms.
    #[error("operation requires at least 2 atoms, pattern has {0}")]
    TooFewAtoms(usize),

    /// Duplicate coordinates break nearest-neighbour uniqueness and are
    /// rejected when a pattern is built.
    #[error("atoms {0} and {1} share identical coordinates")]
    DuplicateAtoms(usize, usize),

    /// Curve combination requires identical radius grids.
    #[error("radius grids do not match")]
    GridMismatch,

    /// A quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// Series truncation cannot meet the requested tail bound.
    #[error("series truncation infeasible: {0}")]
    Truncation(String),

    /// An estimator was handed an empty sample.
    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
