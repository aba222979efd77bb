use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("isometry is not hyperbolic (|trace| = {trace})")]
    NotHyperbolic { trace: f64 },
    #[error("boundary points coincide")]
    CoincidentBoundaryPoints,
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid triangle: {0}")]
    InvalidTriangle(String),
    #[error("connecting geodesic crosses the reference geodesic")]
    SideCrossing,
    #[error("curvature profile leaves [-kappa2^2, -kappa1^2] at r = {r}")]
    ProfileOutOfRange { r: f64 },
    #[error("trajectory left the tabulated range (r = {r})")]
    OutOfTable { r: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no Gamma_theta membership witness found")]
    NoWitness,
    #[error("recurrence defect {delta} exceeds delta0 = {delta0}")]
    DeltaTooLarge { delta: f64, delta0: f64 },
    #[error("generator set failed the ping-pong certificate")]
    NotDiscrete,
    #[error("word length {requested} exceeds budget {budget}")]
    BudgetExceeded { requested: usize, budget: usize },
    #[error("empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, GeomError>;
