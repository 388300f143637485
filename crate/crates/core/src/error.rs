use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a star graph needs at least 2 edges, got {0}")]
    TooFewEdges(usize),

    #[error("edge {edge} has nonpositive length {length}")]
    NonpositiveLength { edge: usize, length: f64 },

    #[error("alpha = {alpha} must be strictly greater than N/2 = {half_n}")]
    AlphaTooSmall { alpha: f64, half_n: f64 },

    #[error("edge-count mismatch: expected {expected}, got {found} ({what})")]
    EdgeCountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("derivative of order {requested} requested, signal declares order {declared}")]
    OrderExceeded { requested: usize, declared: usize },

    #[error("point {value} lies outside [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("polynomial degree {degree} exceeds the cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("polynomials live on different edges ({left} vs {right})")]
    EdgeMismatch { left: usize, right: usize },

    #[error("invalid sampled series: {0}")]
    InvalidSamples(String),

    #[error("endpoint constraint system is singular")]
    SingularConstraintSystem,

    #[error("grid needs at least 8 intervals per edge, got {0}")]
    GridTooCoarse(usize),

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last increment {increment:e})")]
    PicardDiverged { iterations: usize, increment: f64 },

    #[error("compatibility pre-check failed at s = {s}: {failed} record(s) out of tolerance")]
    CompatibilityRejected { s: f64, failed: usize },

    #[error("edge lengths must all be equal for the sum/difference decomposition")]
    UnequalLengths,

    #[error("manufactured solution is not continuous at the vertex (edge {edge})")]
    DiscontinuousAtVertex { edge: usize },

    #[error("operation requires polynomial {0}")]
    RequiresPolynomialData(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration at `{path}`: {source}")]
    Config {
        path: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches a JSON field path to a validation error.
    pub fn at(self, path: impl Into<String>) -> Error {
        Error::Config {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any field-path wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Config { source, .. } => source.root(),
            other => other,
        }
    }
}
