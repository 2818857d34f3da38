use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", path.display())]
    NotFound { path: PathBuf },

    #[error("undecodable image {}: {reason}", path.display())]
    Undecodable { path: PathBuf, reason: String },

    #[error("zero-dimension image: {}", path.display())]
    EmptyImage { path: PathBuf },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to encode {}: {reason}", path.display())]
    Encode { path: PathBuf, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image has {pixels} pixels, fewer than k = {k}")]
    TooFewPixels { pixels: usize, k: usize },

    #[error("image has {distinct} distinct colors, fewer than k = {k}")]
    TooFewColors { distinct: usize, k: usize },

    #[error("dimension mismatch: image is {image_w}x{image_h}, labels are {labels_w}x{labels_h}")]
    DimensionMismatch {
        image_w: u32,
        image_h: u32,
        labels_w: u32,
        labels_h: u32,
    },

    #[error("label {label} out of range for {k} centroids")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("unknown class {name:?}; valid names are {valid}")]
    UnknownClass { name: String, valid: String },

    #[error("no samples found under {}", root.display())]
    NoSamples { root: PathBuf },

    #[error("class {class} has {count} eligible records, needs at least {needed}")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("malformed manifest {} at line {line}: {reason}", path.display())]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("invalid augmentation op {0:?}")]
    InvalidOp(String),

    #[error("all {count} records failed to process")]
    AllFailed { count: usize },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
