use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box: height must be positive (got {0})")]
    ZeroHeight(f64),

    #[error("frames must be consecutive starting at 1: expected frame {expected}, found {found}")]
    NonConsecutiveFrames { expected: u32, found: u32 },

    #[error("detections passed to a single step must share one frame (saw {0} and {1})")]
    MixedFrames(u32, u32),

    #[error("unknown victim id {0}")]
    UnknownVictim(i64),

    #[error("attack window [{onset}, {end}) lies outside the sequence of {frames} frames")]
    WindowOutsideSequence { onset: u32, end: u32, frames: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} requires a non-empty input")]
    EmptyInput(&'static str),

    #[error("{what} is undefined: {why}")]
    Undefined { what: &'static str, why: &'static str },

    #[error("patch must be at least 2x2 (got {width}x{height})")]
    DegeneratePatch { width: usize, height: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("unknown scenario preset {0:?}")]
    UnknownPreset(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
