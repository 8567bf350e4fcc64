use thiserror::Error;

/// Errors raised by the chart, geometry, symmetric-function and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid graph: u = {value} <= 0 at node {node}")]
    InvalidGraph { node: usize, value: f64 },

    #[error("graph is not spacelike at node {node:?}: |Du|/u = {ratio}")]
    NotSpacelike { node: Option<usize>, ratio: f64 },

    #[error("curvature vector is not in the Garding cone Gamma_{k}")]
    Inadmissible { k: usize },

    #[error("node {node} is not {k}-admissible")]
    InadmissibleNode { node: usize, k: usize },

    #[error("metric is not positive definite")]
    MetricNotDefinite,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("non-finite value at node {0}")]
    NonFinite(usize),
}

impl Error {
    /// Attaches a grid node index to errors raised by node-local kernels.
    pub fn at_node(self, node: usize) -> Self {
        match self {
            Error::NotSpacelike { ratio, .. } => Error::NotSpacelike {
                node: Some(node),
                ratio,
            },
            Error::Inadmissible { k } => Error::InadmissibleNode { node, k },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
