use thiserror::Error;

use crate::geometry::GeodesicPath;

/// Errors raised by the geometric and numerical operations of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    ChartDomain { point: Vec<f64> },

    #[error("metric is singular at {point:?} (|det| = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },

    #[error("metric is not symmetric at {point:?} (asymmetry {asymmetry:e})")]
    NotSymmetric { point: Vec<f64>, asymmetry: f64 },

    #[error("metric signature mismatch at {point:?}: expected {expected} negative eigenvalues, found {found}")]
    SignatureMismatch {
        point: Vec<f64>,
        expected: usize,
        found: usize,
    },

    #[error("tensor is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),

    #[error("vector is not tangent to the boundary (normal component {normal_component:e})")]
    NotTangent { normal_component: f64 },

    #[error("no lightlike lift exists: (v', v')_g = {quadratic:e} has the wrong sign")]
    NoLift { quadratic: f64 },

    #[error("ray is tangent to the boundary (|(v, nu)_g| / |v| = {ratio:e})")]
    Tangency { ratio: f64 },

    #[error("ray did not reach the target surface within sigma = {sigma_max}")]
    Escape { sigma_max: f64, partial: Box<GeodesicPath> },

    #[error("integration left the chart domain at sigma = {sigma}")]
    Truncation { sigma: f64, partial: Box<GeodesicPath> },

    #[error("integration needs {required} steps, above the limit of {limit}")]
    NonTerminating { required: usize, limit: usize },

    #[error("shooting Jacobian is ill conditioned (condition number {condition:e}); endpoints look conjugate")]
    ConjugatePoint { condition: f64 },

    #[error("Newton shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("normalization functional vanishes or is negative ({value:e})")]
    Normalization { value: f64 },

    #[error("pair is not on the lightlike set: |r| = {r:e}")]
    NotOnSigma { r: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
