use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed ply header: {0}")]
    PlyHeader(String),

    #[error("ply is missing vertex property `{0}`")]
    PlyMissingProperty(String),

    #[error("ply payload truncated at byte offset {offset} (property `{property}` of vertex {vertex})")]
    PlyTruncated {
        offset: usize,
        vertex: usize,
        property: String,
    },

    #[error("empty cloud")]
    EmptyCloud,

    #[error("degenerate primitive: {0}")]
    Degenerate(String),

    #[error("invalid view {index}: {reason}")]
    InvalidView { index: usize, reason: String },

    #[error("invalid view set: {0}")]
    InvalidViewSet(String),

    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("image {width}x{height} is smaller than the {window}x{window} ssim window")]
    ImageTooSmall { width: u32, height: u32, window: u32 },

    #[error("every primitive was pruned (tau_c = {tau_c}, tau_n = {tau_n})")]
    EverythingPruned { tau_c: f64, tau_n: f64 },

    #[error("scene construction failed after {attempts} attempts: {reason}")]
    SceneRejected { attempts: usize, reason: String },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit status: 2 for bad input or configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } => match source.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => 2,
                _ => 1,
            },
            Error::Degenerate(_)
            | Error::SceneRejected { .. }
            | Error::PixelOutOfBounds { .. }
            | Error::Image { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
