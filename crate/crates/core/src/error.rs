use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates an admissibility relation; the message names it.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),

    #[error("Newton iteration failed at t = {t}: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence { t: f64, residual: f64, iterations: usize },

    #[error("value {value:.3e} lies outside the range of the time modulus (sup {sup:.3e})")]
    ModulusRange { value: f64, sup: f64 },

    #[error("search cap exceeded: {0}")]
    SearchCap(String),

    #[error("comparison hypothesis violated on the parabolic boundary: max(u - v) = {excess:.3e} at {location:?}")]
    BoundaryHypothesis { excess: f64, location: (usize, usize) },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}
