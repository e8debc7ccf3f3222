use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no separated set of {n} directions found after {attempts} attempts")]
    FeasibilityExhausted { n: usize, attempts: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate entry for track {track_id:?} at frame {frame}")]
    DuplicateEntry { track_id: String, frame: usize },

    #[error("frame {frame} out of range for a grid of {n_frames} frames")]
    FrameOutOfRange { frame: usize, n_frames: usize },

    #[error("unknown track {0:?}")]
    UnknownTrack(String),

    #[error("frame grids differ: {0}")]
    GridMismatch(String),

    #[error("no true positives: metric undefined")]
    UndefinedOnEmptyTp,

    #[error("no ground-truth detections: metric undefined")]
    UndefinedOnEmptyGroundTruth,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("observations carry no source tags")]
    MissingTags,

    #[error("cannot split a track with {active} active frames into {k} pieces")]
    InvalidK { k: usize, active: usize },

    #[error("need at least 2 defined values, got {0}")]
    InsufficientData(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
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
