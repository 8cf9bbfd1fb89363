use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: bad magic {found:?}, expected \"KHCV\"", .path.display())]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{}: unsupported format version {version}", .path.display())]
    UnsupportedVersion { path: PathBuf, version: u8 },

    #[error("{}: unsupported dtype {dtype} for ndim {ndim}", .path.display())]
    UnsupportedDtype { path: PathBuf, dtype: u8, ndim: u8 },

    #[error("{}: unsupported ndim {ndim}", .path.display())]
    BadNdim { path: PathBuf, ndim: u8 },

    #[error("{}: truncated file, expected {expected} bytes, found {found}", .path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: {msg}", .path.display())]
    Corrupt { path: PathBuf, msg: String },

    #[error("{}: PGM/PPM format error: {msg}", .path.display())]
    ImageFormat { path: PathBuf, msg: String },

    #[error("scene too short: need {needed} frames, have {available}")]
    SceneTooShort { needed: usize, available: usize },

    #[error("frames too small for a {levels}-level pyramid: min dimension {min_dim} < {required}; use fewer pyramid levels")]
    PyramidTooDeep {
        levels: usize,
        min_dim: usize,
        required: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
