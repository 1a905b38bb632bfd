//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed cell or row while reading a CSV file. Row and column are 1-based.
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    /// Data violates a structural invariant (shape, finiteness, range).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Normal matrix stayed numerically singular even after ridge stabilization.
    #[error("singular normal matrix on segment ({start}, {end}]")]
    SingularSegment { start: usize, end: usize },

    /// A cluster received (numerically) zero total weight.
    #[error("cluster {cluster} has zero effective weight")]
    EmptyCluster { cluster: usize },

    /// Requested segment count cannot fit on the grid.
    #[error(
        "infeasible segmentation: {segments} segments with minimum length {min_len} \
         do not fit on {points} points"
    )]
    InfeasibleSegmentation {
        segments: usize,
        min_len: usize,
        points: usize,
    },

    /// Every restart of an iterative fit failed.
    #[error("fit failed: {0}")]
    FitFailed(String),

    /// The constrained-CEM / K-means-like trajectories diverged.
    #[error("equivalence violated at iteration {iteration}: {message}")]
    EquivalenceViolation { iteration: usize, message: String },

    /// No grid cell produced a usable criterion value.
    #[error("model selection failed: {0}")]
    SelectionFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
