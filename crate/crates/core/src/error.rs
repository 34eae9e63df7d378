use thiserror::Error;

/// Problems with graph contents, independent of where the graph came from.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("unknown node label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate node label `{0}`")]
    DuplicateNode(String),
    #[error("invalid node label `{0}`")]
    InvalidLabel(String),
    #[error("duplicate edge `{src}` -> `{dst}`")]
    DuplicateEdge { src: String, dst: String },
    #[error("self-edge on `{0}`")]
    SelfEdge(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file} line {line}: {source}")]
    Parse {
        file: &'static str,
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph has n + m = {size}, above the exact enumeration budget of {budget}")]
    BudgetExceeded { size: usize, budget: usize },
    #[error("invalid k = {k} for a graph with {n} nodes")]
    InvalidK { k: usize, n: usize },
    #[error("invalid bottom-k parameter bk = {0} (need bk >= 2)")]
    InvalidBk(usize),
    #[error("invalid approximation parameters eps = {eps}, delta = {delta} (both must lie in (0, 1))")]
    InvalidParams { eps: f64, delta: f64 },
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("prediction has {pred} nodes but ground truth covers k = {truth}")]
    MismatchedK { pred: usize, truth: usize },
    #[error("infeasible synthetic shape: {0}")]
    InfeasibleShape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The underlying graph error, if any, with file position stripped.
    pub fn graph_error(&self) -> Option<&GraphError> {
        match self {
            Error::Parse { source, .. } => Some(source),
            Error::Graph(e) => Some(e),
            _ => None,
        }
    }

    /// True for errors caused by bad input rather than by the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
