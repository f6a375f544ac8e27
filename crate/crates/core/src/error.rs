use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("metric unavailable for this source: {0}")]
    MetricUnavailable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("infeasible transport: {0}")]
    InfeasibleTransport(String),

    #[error("Ricci flow diverged at iteration {iteration}")]
    FlowDiverged { iteration: usize },

    #[error("node sets differ: {0}")]
    NodeSetMismatch(String),

    #[error("non-finite heat kernel at t = {t}")]
    NonFiniteExponential { t: f64 },

    #[error("curvature map is empty")]
    EmptyCurvatureMap,

    #[error("subsampling failed: {0}")]
    SubsetTooSmall(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
