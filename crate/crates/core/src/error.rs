use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the engine, the simulator and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bitmap too small: {width}x{height} (need at least 9x8)")]
    DimensionTooSmall { width: u32, height: u32 },

    #[error("bitmap pixel count {actual} does not match {width}x{height}")]
    PixelCountMismatch {
        width: u32,
        height: u32,
        actual: usize,
    },

    #[error("similarity threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    ScenarioParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario validation failed: {0}")]
    ScenarioInvalid(String),

    #[error("render calibration failed for screens {a} and {b}: similarity {score:.4} ({rule})")]
    Calibration {
        a: String,
        b: String,
        score: f64,
        rule: &'static str,
    },

    #[error("report does not belong to this app (report {report}, app {app})")]
    GroundTruthMismatch { report: String, app: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
