use std::path::PathBuf;

use thiserror::Error;

use crate::mask::PageCanvas;

pub type Result<T, E = CoteError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoteError {
    #[error("canvas mismatch: {left} vs {right}")]
    CanvasMismatch { left: PageCanvas, right: PageCanvas },

    #[error("invalid canvas {width}x{height}: both dimensions must be positive")]
    InvalidCanvas { width: u32, height: u32 },

    #[error("duplicate reading order index {index} (regions {first:?} and {second:?})")]
    DuplicateReadingOrder { index: u32, first: String, second: String },

    #[error("SSU {earlier} and SSU {later} overlap by {area} px (regions {region_ids:?})")]
    SsuOverlap {
        earlier: usize,
        later: usize,
        area: u64,
        region_ids: Vec<String>,
    },

    #[error("unknown header class {0:?}")]
    UnknownHeaderClass(String),

    #[error("empty ground truth: total SSU area is zero")]
    EmptyGroundTruth,

    #[error("missing class id on {kind} {id:?}")]
    MissingClass { kind: &'static str, id: String },

    #[error("prediction {id:?} has score {score} outside [0, 1]")]
    ScoreOutOfRange { id: String, score: f64 },

    #[error("prediction {0:?} has no confidence score")]
    MissingScore(String),

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unsupported document version: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: String },

    #[error("predictions reference unknown image ids: {0:?}")]
    UnknownImageIds(Vec<String>),

    #[error("no evaluable pages")]
    NoEvaluablePages,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(String),
}

impl CoteError {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CoteError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoteError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code, used by the CLI error output.
    pub fn code(&self) -> &'static str {
        match self {
            CoteError::CanvasMismatch { .. } => "canvas_mismatch",
            CoteError::InvalidCanvas { .. } => "invalid_canvas",
            CoteError::DuplicateReadingOrder { .. } => "duplicate_reading_order",
            CoteError::SsuOverlap { .. } => "ssu_overlap",
            CoteError::UnknownHeaderClass(_) => "unknown_header_class",
            CoteError::EmptyGroundTruth => "empty_ground_truth",
            CoteError::MissingClass { .. } => "missing_class",
            CoteError::ScoreOutOfRange { .. } => "score_out_of_range",
            CoteError::MissingScore(_) => "missing_score",
            CoteError::Undefined(_) => "undefined",
            CoteError::InvalidLayout(_) => "invalid_layout",
            CoteError::Parse { .. } => "parse",
            CoteError::VersionMismatch { .. } => "version_mismatch",
            CoteError::UnknownImageIds(_) => "unknown_image_ids",
            CoteError::NoEvaluablePages => "no_evaluable_pages",
            CoteError::Io { .. } => "io",
            CoteError::Image(_) => "image",
        }
    }
}
