use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(String),
    #[error("matrix `{0}` is not positive semidefinite")]
    NotPsd(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix `{0}` is not symmetric")]
    AsymmetricInput(String),
    #[error("matrix `{0}` is not square")]
    NotSquare(String),
    #[error("matrix `{name}` is numerically singular (condition number {cond:.3e})")]
    NearSingular { name: String, cond: f64 },
    #[error("perturbation alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("invalid conditional covariance: {0}")]
    InvalidConditionalCov(String),
    #[error("invalid enhanced noise covariance: {0}")]
    InvalidEnhancedNoise(String),
    #[error("constraint set is empty for s = {s}, t = {t}")]
    Infeasible { s: f64, t: f64 },
    #[error("iteration limit of {0} exceeded")]
    MaxIterationsExceeded(usize),
    #[error("dimension {0} is too large for this operation")]
    DimensionTooLarge(usize),
    #[error("no multiplier reproduces the KKT system (best residual {0:.3e})")]
    NoValidMultiplier(f64),
    #[error("input `{0}` is not positive semidefinite")]
    NonPsdInput(String),
    #[error("enhanced model is not degraded")]
    NotDegraded,
    #[error("multiplier mu is zero; gamma is undefined")]
    MuZero,
    #[error("conditional covariance too close to sigma_x (min gap eigenvalue {0:.3e})")]
    DegenerateConditional(f64),
    #[error("empirical covariance is singular")]
    SingularEmpiricalCov,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model parse error: {0}")]
    Parse(String),
}
