use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("covariate vector has length {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate Markov chain: p01 + p10 = 0")]
    DegenerateChain,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (gradient max-norm {grad_norm:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last_point: Vec<f64>,
    },

    #[error(
        "coefficient for outcome {outcome}, covariate {cov} diverged to {value:.3} \
         (bound {bound}); data may be separable"
    )]
    Separable {
        outcome: usize,
        cov: usize,
        value: f64,
        bound: f64,
    },

    #[error("covariate column {cov} is constant and collinear with the intercept")]
    CollinearColumn { cov: usize },

    #[error("observed information is degenerate: {0}")]
    DegenerateInformation(String),

    #[error("sample too small: {actual} draws, at least {needed} required")]
    SampleTooSmall { needed: usize, actual: usize },

    #[error("within-chain covariance is singular at parameter index {coordinate}")]
    SingularCovariance { coordinate: usize },

    #[error("data too sparse for the goodness-of-fit cell scheme: all expected counts < 1")]
    SparseData,

    #[error("correlation undefined: zero weighted variance in series `{0}`")]
    UndefinedCorrelation(String),

    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failure category, used by the CLI to pick distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Ingest,
    Fit,
    Diagnostic,
}

impl Error {
    pub fn category(&self) -> Category {
        use Error::*;
        match self {
            Ingest { .. } => Category::Ingest,
            Config(_) | Io(_) => Category::Config,
            NonConvergence { .. }
            | Separable { .. }
            | CollinearColumn { .. }
            | DegenerateInformation(_)
            | DimensionMismatch { .. }
            | DegenerateChain
            | InvalidInput(_) => Category::Fit,
            SampleTooSmall { .. }
            | SingularCovariance { .. }
            | SparseData
            | UndefinedCorrelation(_) => Category::Diagnostic,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
