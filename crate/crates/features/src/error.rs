use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image of {width}×{height} is too small: {reason}")]
    TooSmall {
        width: usize,
        height: usize,
        reason: String,
    },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("invalid region: {0}")]
    Region(String),
    #[error("tiling {rows}×{cols} does not divide a {width}×{height} image")]
    Tiling {
        rows: usize,
        cols: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid plane: {0}")]
    Plane(String),
    #[error("unknown descriptor kind `{0}`")]
    UnknownKind(String),
    #[error("image decoding failed for {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Core(#[from] dps_core::DpsError),
}

pub type Result<T> = std::result::Result<T, FeatureError>;
