use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("zero vector (norm {0:e} below tolerance)")]
    ZeroVector(f64),
    #[error("fundamental tensor is not positive definite")]
    NotPositiveDefinite,
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("trajectory left the level set (defect {defect:e} at t = {t})")]
    ConstraintDrift { t: f64, defect: f64 },
    #[error("too many integration steps ({0})")]
    TooManySteps(usize),
    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("embedding is rank deficient at parameter {0:?}")]
    DegenerateTangent(Vec<f64>),
    #[error("fields live on different paths")]
    PathMismatch,
    #[error("vector is not in the kernel (|D x| = {0:e})")]
    NotInKernel(f64),
    #[error("unresolved cluster of focal times near t = {0}")]
    UnresolvedZeroCluster(f64),
    #[error("endpoint T = {0} is a focal time")]
    EndpointIsFocal(f64),
    #[error("focal point is not regular")]
    NotRegular,
    #[error("horizon T_max = {0} reached before the requested focal time")]
    HorizonTooSmall(f64),
    #[error("not enough neighbouring rays to classify ({0})")]
    InsufficientNeighbors(usize),
    #[error("no non-injectivity witness found: {0}")]
    WitnessNotFound(String),
    #[error("no convergent foot: {0}")]
    NoConvergentFoot(String),
    #[error("oracle failure: {0}")]
    OracleFailure(String),
    #[error("point {0:?} lies outside the grid box")]
    OutOfBox(Vec<f64>),
    #[error("mesh too coarse: eigenvalue {0:e} inside the resolution band")]
    MeshTooCoarse(f64),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for failures caused by malformed input rather than numerics.
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Scenario(_) | Error::Expr(_) | Error::InvalidMetric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
