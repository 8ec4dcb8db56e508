use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty mesh")]
    EmptyMesh,
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("requires watertight mesh")]
    NotWatertight,
    #[error("degenerate configuration")]
    Degenerate,
    #[error("topology mismatch")]
    TopologyMismatch,
    #[error("frame count mismatch: manifest says {expected}, found {found}")]
    FrameCountMismatch { expected: usize, found: usize },
    #[error("no manifest in {0}")]
    NoManifest(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn other(msg: impl Into<String>) -> Self {
        Error::Other(msg.into())
    }
}
