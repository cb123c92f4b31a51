use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not an immersion at p = ({x}, {y})")]
    NotImmersion { x: f64, y: f64 },
    #[error("surface not elliptic at p = ({x}, {y}): principal curvature {value}")]
    NotElliptic { x: f64, y: f64, value: f64 },
    #[error("coefficient not positive definite at element {element}, quadrature point {point}")]
    CoefficientNotSpd { element: usize, point: usize },
    #[error("resonant operator: {0}; use the least-squares path instead")]
    Resonant(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("gradient field not integrable at this resolution (relative residual {0:.3e})")]
    NotIntegrable(f64),
    #[error("fixed point iteration did not converge in {iterations} iterations")]
    NotConverged { iterations: usize, history: Vec<f64> },
    #[error("at least 3 iterations are needed to estimate a contraction rate, got {0}")]
    TooFewIterations(usize),
    #[error("an order-2 field is required")]
    OrderTooLow,
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
