use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0} does not exist")]
    UnknownVertex(usize),

    #[error("vertex set must be nonempty")]
    EmptySet,

    #[error("{0} is not contained in {1}")]
    NotNested(&'static str, &'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero probability: {0}")]
    ZeroProbability(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("random walk exceeded the step budget of {0} steps")]
    StepBudget(u64),

    #[error("rejection sampler exceeded the budget of {0} attempts")]
    AttemptBudget(u64),

    #[error("invalid flow: {0}")]
    InvalidFlow(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("unsupported graph family: {0}")]
    UnsupportedFamily(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown operation `{0}`")]
    UnknownOperation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
