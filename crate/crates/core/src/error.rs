use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // graph validation
    #[error("cycle detected among nodes {0:?}")]
    Cycle(Vec<usize>),
    #[error("edge ({0}, {1}) references a node that does not exist")]
    DanglingEdge(usize, usize),
    #[error("op type `{0}` has no capacity entry")]
    MissingCapacity(String),
    #[error("capacity for op type `{0}` must be positive")]
    ZeroCapacity(String),
    #[error("duplicate node id {0}")]
    DuplicateId(usize),
    #[error("node ids must be dense 0..{expected}, found {found}")]
    NonDenseIds { expected: usize, found: usize },
    #[error("node {0} has zero duration")]
    ZeroDuration(usize),

    // expressions
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("non-finite coefficient in expression")]
    NonFinite,
    #[error("expression has no nonzero terms")]
    EmptyExpr,

    // embeddings, retrieval, kernels
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("op type `{0}` is not in the embedding vocabulary")]
    UnknownType(String),
    #[error("need at least 2 embeddings to fit a normalizer, got {0}")]
    TooFewSamples(usize),
    #[error("layout `{found}` is incompatible with `{expected}`")]
    Layout { expected: String, found: String },
    #[error("top-m retrieval needs m >= 1")]
    ZeroM,
    #[error("kernel library is empty")]
    EmptyLibrary,
    #[error("no motifs to cluster")]
    NoMotifs,
    #[error("similarity threshold {0} outside (0, 1]")]
    Threshold(f64),
    #[error("weight `{name}` = {value} outside [{lo}, {hi}]")]
    WeightRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("template family `{family}` has no weight `{name}`")]
    UnknownWeight { family: String, name: String },
    #[error("unknown template family `{0}`")]
    UnknownFamily(String),

    // scheduling
    #[error("graph has {0} nodes; the exact oracle accepts at most {1}")]
    OracleTooLarge(usize, usize),

    // loop and harness
    #[error("unknown ablation mode `{0}`")]
    UnknownAblation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("degenerate generator spec: {0}")]
    DegenerateSpec(String),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse category used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Provider(_) => ErrorKind::Provider,
            Invariant(_) => ErrorKind::Invariant,
            Io(_) => ErrorKind::Io,
            Config(_) | UnknownAblation(_) => ErrorKind::Usage,
            _ => ErrorKind::Format,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Format,
    Provider,
    Invariant,
    Io,
}
