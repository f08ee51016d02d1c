use std::io;

use thiserror::Error;

use crate::stream::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop on node {0} rejected")]
    SelfLoop(NodeId),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    /// A buffer operation was called outside its precondition.
    #[error("buffer contract violated: {0}")]
    Contract(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("edge {0} is already buffered (simple streams must be deduplicated)")]
    DuplicateEdge(crate::stream::Edge),

    #[error("metric undefined: {0}")]
    Metric(&'static str),

    #[error("probe invalid: {0}")]
    ProbeInvalid(String),

    #[error("probe unsupported: {0}")]
    ProbeUnsupported(String),
}
