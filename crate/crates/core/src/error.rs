use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("isolated vertex {0} has no incident face")]
    IsolatedVertex(usize),

    #[error("point is behind camera (z = {0})")]
    BehindCamera(f64),

    /// Geometry that the algorithm cannot work with (collinear points, empty sets).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("empty restart support: no visible keypoints")]
    EmptyRestartSupport,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("pose not found: {0}")]
    PoseNotFound(String),

    #[error("unsatisfiable scene: {0}")]
    Unsatisfiable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
