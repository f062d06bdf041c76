use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("scene has no submaps")]
    EmptyScene,

    #[error("empty floor mask: no sample carries positive weight")]
    EmptyFloorMask,

    #[error("insufficient floor candidates: need {needed}, mask has {available}")]
    InsufficientFloorCandidates { needed: usize, available: usize },

    #[error("degenerate region of interest: no pixels selected")]
    EmptyRoi,

    #[error("node {0} not in graph")]
    UnknownNode(u32),

    #[error("illegal action: node {target} is not adjacent to {current}")]
    IllegalAction { current: u32, target: u32 },

    #[error("no path from node {from} to node {to}")]
    Unreachable { from: u32, to: u32 },

    #[error("segmentation provider failed: {0}")]
    Provider(String),

    #[error("parse error in {path} (line {line}): {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("scene file corrupt: {0}")]
    Corrupt(String),
}

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
