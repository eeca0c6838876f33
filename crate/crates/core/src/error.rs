use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density matrix is not physical: {0}")]
    NotPhysical(String),

    #[error("crosstalk inversion is ambiguous: rotation angle {angle} rad is at or past the first branch (pi/2)")]
    AmbiguousBranch { angle: f64 },

    #[error("pi-time ratio {ratio} must exceed 1 for an off-center ion")]
    WaistRatio { ratio: f64 },

    #[error("tilt {tilt} rad is outside the small-angle domain (|tilt| < {limit})")]
    SmallAngle { tilt: f64, limit: f64 },

    #[error("target ({x}, {y}) um is unreachable: {reason}")]
    Unreachable { x: f64, y: f64, reason: String },

    #[error("site {site} is not valid for a table of {count} sites")]
    InvalidSite { site: usize, count: usize },

    #[error("counts table is missing basis {0}")]
    MissingBasis(char),

    #[error("scan range error: {0}")]
    ScanRange(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    ReadFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Configuration problems (bad file, bad values) as opposed to failures
    /// while running an experiment.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::ReadFile { .. } | Error::Json(_) | Error::InvalidParameter { .. }
        )
    }
}
