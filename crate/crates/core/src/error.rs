use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown tag \"{0}\"")]
    UnknownTag(String),
    #[error("tag mismatch: {0}")]
    TagMismatch(String),
    #[error("inverted element {element} (signed area {area:e})")]
    InvertedElement { element: usize, area: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("morphing diverged: {0}")]
    Diverged(String),
    #[error("morphing did not converge: {0}")]
    NotConverged(String),
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no admissible mode count: {0}")]
    NoAdmissibleR(String),
    #[error("target {index} failed: {source}")]
    Target {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
