use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("domain is not compact")]
    NotCompact,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("target returned NaN at {point:?}")]
    TargetNan { point: Vec<f64> },

    #[error("non-finite gradient at {point:?}")]
    Gradient { point: Vec<f64> },

    #[error("invalid proposal: {0}")]
    Proposal(String),

    #[error("cannot fit mixture: {0}")]
    Fit(String),

    #[error(
        "initialization failed: {draws} consecutive draws had zero density; \
         supply a domain that covers the support of the target"
    )]
    InitFailed { draws: usize },

    #[error("run aborted after {f_evals} target evaluations with {accepted} accepted samples")]
    Aborted { f_evals: u64, accepted: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
