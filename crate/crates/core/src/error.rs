use thiserror::Error;

/// Errors raised across the optimisation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    Space(String),

    #[error("value for `{variable}` outside its domain: {detail}")]
    Domain { variable: String, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance matrix not positive definite after jitter {jitter:e}")]
    Singular { jitter: f64 },

    #[error("source task {index}: {source}")]
    SourceFit {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ensemble state: {0}")]
    State(String),

    #[error("weighting diverged: {0}")]
    Divergence(String),

    #[error("no admissible candidate: {0}")]
    NoCandidate(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
