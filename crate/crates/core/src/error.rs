use thiserror::Error;

/// Errors surfaced by mesh parsing, operator assembly and the numeric kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("mesh validation failed: {0}")]
    Validation(String),

    #[error("degenerate face {face}: {msg}")]
    DegenerateFace { face: usize, msg: String },

    #[error("non-positive lumped mass at vertex {vertex}")]
    ZeroMass { vertex: usize },

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("operator is singular: {0}")]
    SingularOperator(String),

    #[error("{method} did not converge within {iters} iterations (residual {residual:.3e})")]
    NonConvergence {
        method: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("matrix is not symmetric: max|S - Sᵀ| = {deviation:.3e} exceeds {tol:.3e}")]
    NonSymmetric { deviation: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
