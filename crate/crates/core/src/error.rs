use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the operator laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("1 lies in the spectrum within tolerance (distance {distance:e})")]
    NotInvertible { distance: f64 },

    #[error("operator is not dissipative (smallest imaginary part {min_imag:e})")]
    NonDissipative { min_imag: f64 },

    #[error("eigenvector condition number {condition:e} exceeds the limit {limit:e}")]
    Conditioning { condition: f64, limit: f64 },

    #[error("point {z} lies outside the closed upper half-plane")]
    Domain { z: Complex64 },

    #[error("point {zeta} is a pole of the transplanted function")]
    Pole { zeta: Complex64 },

    #[error("I + tC is singular at t = {t}")]
    PathDegenerate { t: f64 },

    #[error("outside the scope of the maximality lemma: {0}")]
    OutOfScope(String),

    #[error("eigenvalue {eigenvalue} is within {eps:e} of the real axis; density representation invalid")]
    SingularPart { eigenvalue: Complex64, eps: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("not a contraction: norm {norm}")]
    NotContraction { norm: f64 },

    #[error("dilation degenerate: {0}")]
    DilationDegenerate(String),

    #[error("interval endpoint {endpoint} collides with an eigenvalue of the dilation")]
    EndpointCollision { endpoint: f64 },

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
