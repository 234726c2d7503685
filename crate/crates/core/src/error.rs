use thiserror::Error;

/// Errors produced while configuring, assembling or solving a collocation problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mesh with N = {n} interior whole points is too small for stencil radius r = {r} (need N >= 2r+1 = {need})")]
    MeshTooSmall { n: usize, r: usize, need: usize },

    #[error("field has no value at half-index {index2}/2 (stencil offset {offset2}/2 from center {center2}/2)")]
    MissingFieldValue { center2: i64, offset2: i64, index2: i64 },

    #[error("volume constraint cannot be evaluated at x = {x} (half-index {index2}/2)")]
    ConstraintUnavailable { index2: i64, x: f64 },

    #[error("2D volume constraint cannot be evaluated at ({x}, {y})")]
    ConstraintUnavailable2d { x: f64, y: f64 },

    #[error("quadrature did not converge: estimate {estimate:e} after {panels} panels (value {value:e})")]
    QuadratureNotConverged { value: f64, estimate: f64, panels: usize },

    #[error("matrix is singular to working precision at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("operator not PD: curvature {curvature:e} at iteration {iteration}")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("conjugate gradient did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("source term is not sign-definite (min {min:e}, max {max:e})")]
    NotSignDefinite { min: f64, max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
