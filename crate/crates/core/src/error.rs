//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the geometric and numerical operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix must be square with even dimension, got {rows}x{cols}")]
    BadMatrixShape { rows: usize, cols: usize },

    #[error("block `{name}` is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { name: &'static str, asymmetry: f64 },

    #[error("matrix is not in sp(2n,R): residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotHamiltonianMatrix { residual: f64, tol: f64 },

    #[error("operation requires a z-independent Hamiltonian (dh/dz = 0)")]
    ZDependentHamiltonian,

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("degenerate point: {reason}")]
    DegeneratePoint { reason: String },

    #[error("exact-affine bracket requested but field `{which}` has no closed-form Jacobian")]
    JacobianUnavailable { which: &'static str },

    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },

    #[error("integration span ({s0}, {s1}) needs {needed} steps, exceeding max_steps = {max_steps}")]
    StepBudgetExceeded {
        s0: f64,
        s1: f64,
        needed: usize,
        max_steps: usize,
    },

    #[error("state became non-finite during integration; last valid s = {last_s}")]
    IntegrationDiverged { last_s: f64 },

    #[error("Newton iteration did not converge at lambda index {lambda_index} (residual {residual:.3e} after {iterations} iterations)")]
    NewtonNonConvergence {
        lambda_index: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("no real solution for the initial strip at lambda index {lambda_index}: {reason}")]
    NoStripSolution { lambda_index: usize, reason: String },

    #[error("initial data manifold is characteristic at lambda index {lambda_index}")]
    CharacteristicPoint { lambda_index: usize },

    #[error("generator does not reproduce the characteristic field (max mismatch {residual:.3e}); coefficient convention bug")]
    ConventionMismatch { residual: f64 },

    #[error("layer index {k} out of range 1..={layers}")]
    LayerOutOfRange { k: usize, layers: usize },

    #[error("grazing incidence: ray axis momentum vanishes at an interface (s = {s})")]
    GrazingIncidence { s: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
