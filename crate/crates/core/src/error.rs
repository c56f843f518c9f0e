use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("malformed box at coordinate {index}: lower {lower} > upper {upper}")]
    MalformedBox { index: usize, lower: f64, upper: f64 },

    #[error("invalid ball: {0}")]
    InvalidBall(String),

    #[error("point is not in the set (violation {violation:e})")]
    NotInSet { violation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "declared Lipschitz bound {declared} exceeded: sampled ratio {ratio} at pair #{pair}"
    )]
    LipschitzExceeded {
        declared: f64,
        ratio: f64,
        pair: usize,
        z1: Vec<f64>,
        z2: Vec<f64>,
    },

    #[error("step size {alpha} for {method} violates the bound alpha < {bound}")]
    StepSize {
        method: String,
        alpha: f64,
        bound: f64,
    },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("diverged at iteration {iter}: |z| = {norm:e}")]
    Diverged { iter: usize, norm: f64 },

    #[error("trace is missing consecutive iterates: {0}")]
    MissingIterates(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("power iteration did not converge after {iters} iterations")]
    NoConvergence { iters: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("unsupported problem structure: {0}")]
    Unsupported(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
