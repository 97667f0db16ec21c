use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero group velocity: |g0 xi| = {norm:e} is below tolerance")]
    ZeroVelocity { norm: f64 },

    #[error("excluded point: {0}")]
    ExcludedPoint(&'static str),

    #[error("outside the domain of {what}: beta = {beta}, threshold = {threshold}")]
    Domain {
        what: &'static str,
        beta: f64,
        threshold: f64,
    },

    #[error("singular configuration: |x_perp| = {perp:e} is below {tol:e} * |x|")]
    SingularConfiguration { perp: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("unsupported metric family: {0}")]
    UnsupportedFamily(String),

    #[error("grid violation: {0}")]
    GridViolation(String),

    #[error("initial data is not null: |p2| = {p2:e} exceeds {bound:e}")]
    NotNull { p2: f64, bound: f64 },

    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),

    #[error("premise violated: lambda_min = {lambda_min:e}")]
    HypothesisViolation { lambda_min: f64 },

    #[error("matrix is not Hermitian: max |A - A*| = {defect:e}")]
    NonHermitian { defect: f64 },

    #[error("symbol is not nonnegative: minimum sampled value {min:e}")]
    NotNonnegative { min: f64 },

    #[error("constant missing for rung {rung}: run the operator verification first")]
    ConstantMissing { rung: usize },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameters(msg.into())
    }
}
