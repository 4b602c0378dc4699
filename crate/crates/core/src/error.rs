use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
///
/// Vertex indices carried by error values are 1-based, matching the
/// user-facing numbering.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("vertex {vertex} is out of range for a graph with {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("duplicate vertex {0} in vertex set")]
    DuplicateVertex(usize),
    #[error("vertices {i} and {j} do not have identical neighbourhoods")]
    NeighbourhoodMismatch { i: usize, j: usize },
    #[error("cannot parse graph: {0}")]
    GraphParse(String),
    #[error("{what} has size {size}, above the limit of {limit}")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },
    #[error("no positive partitions of {n} into {r} parts")]
    EmptyDomain { n: u32, r: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point is not on the simplex: {0}")]
    NotOnSimplex(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("operation requires the {expected} chain")]
    WrongVariant { expected: &'static str },
    #[error("chain started from {0} can never be absorbed")]
    CannotAbsorb(String),
    #[error("moments of order {requested} are not in a table of order {computed}")]
    OrderNotComputed { requested: u32, computed: u32 },
    #[error("event budget of {budget} exceeded")]
    EventBudgetExceeded { budget: u64 },
    #[error("singular linear system at order {order}")]
    Singular { order: u32 },
    #[error("series did not converge within {terms} terms")]
    SeriesDiverged { terms: usize },
}

impl Error {
    /// True for errors caused by bad input rather than by a failure while
    /// computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::EventBudgetExceeded { .. } | Error::Singular { .. } | Error::SeriesDiverged { .. }
        )
    }
}
