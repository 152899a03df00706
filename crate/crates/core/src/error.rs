use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the odometry library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate plane: {0}")]
    DegeneratePlane(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("insufficient constraints in {step}: {found} correspondences, need {required}")]
    InsufficientConstraints {
        step: Step,
        found: usize,
        required: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which half of the two-step optimization an error or diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Step {
    /// `(t_z, roll, pitch)` from point-to-plane residuals.
    Planar,
    /// `(t_x, t_y, yaw)` from point-to-edge residuals.
    Edge,
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Step::Planar => f.write_str("step 1 (planar: t_z, roll, pitch)"),
            Step::Edge => f.write_str("step 2 (edge: t_x, t_y, yaw)"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
