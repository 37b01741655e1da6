use thiserror::Error;

/// Raised by the simplex solver when the refined solution does not satisfy
/// the constraints it claims to satisfy.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("numerical instability in LP: residual {0:.3e} exceeds tolerance")]
    Numerical(f64),
    #[error("LP iteration limit reached")]
    IterationLimit,
}

/// Errors raised by the per-bunch volume and counting backends.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("unbounded solution space")]
    Unbounded,
    #[error("cannot count an infinite set")]
    InfiniteCount,
    #[error("estimation degenerate: no sample hit phase {0}")]
    EstimationDegenerate(usize),
    #[error("ellipsoid lost positive definiteness")]
    NotPositiveDefinite,
    #[error("integer overflow while counting")]
    Overflow,
    #[error("time limit exceeded")]
    Timeout,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }
}

/// Top-level error of a `volcount` invocation; each variant maps to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{0}")]
    Io(String),
    #[error("backend failure: {0}")]
    Backend(BackendError),
    #[error("time limit exceeded")]
    Timeout,
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Parse { .. } | Error::Io(_) => 2,
            Error::Backend(_) => 3,
            Error::Timeout => 4,
        }
    }
}

impl From<BackendError> for Error {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Timeout => Error::Timeout,
            other => Error::Backend(other),
        }
    }
}
