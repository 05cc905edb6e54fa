use crate::graph::{ItemId, Node, UserId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(Node),

    #[error("duplicate interaction for pair ({user}, {item})")]
    DuplicatePair { user: UserId, item: ItemId },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("random walk did not converge (residual {residual:e} after {iterations} iterations)")]
    NotConverged { residual: f64, iterations: usize },

    /// No path joins the pair, so the co-occurrence probability is undefined.
    #[error("disjoint: no path between {user} and {item}")]
    Disjoint { user: UserId, item: ItemId },

    #[error("junction tree cluster of {size} variables exceeds cap {cap}; use a smaller BCNS size")]
    TreewidthExceeded { size: usize, cap: usize },

    #[error("model has {size} variables, limit is {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("metric needs at least one positive and one negative label")]
    SingleClass,

    #[error("cannot sample negatives: {0}")]
    Sampling(String),

    #[error("empty input: {0}")]
    Empty(String),
}
