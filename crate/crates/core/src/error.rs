use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no edges")]
    NoEdges,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("node {node} out of range 1..={num_nodes}")]
    NodeOutOfRange { node: NodeId, num_nodes: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("nothing to evaluate")]
    NothingToEvaluate,

    #[error("metric needs at least one positive label")]
    NoPositives,

    #[error("metric needs both positive and negative labels")]
    DegenerateLabels,

    #[error("scores contain NaN")]
    NanScore,

    #[error("readout over an empty feature set")]
    EmptyFeatures,

    #[error("inductive test set is empty (no test edge touches a masked node)")]
    EmptyInductiveSet,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
