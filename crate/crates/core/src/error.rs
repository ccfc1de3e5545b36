use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gradient requested on a non-smooth ray of the gauge")]
    NonSmoothPoint,
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),
    #[error("grid functions are sampled on different grids")]
    GridMismatch,
    #[error("invalid grid function: {0}")]
    InvalidGrid(String),
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("quadrature failed to reach tolerance {tol:e} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, tol: f64 },
    #[error("Picard iteration did not converge after {iterations} iterations (last update {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("linear solver did not converge: {0}")]
    LinearSolver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
