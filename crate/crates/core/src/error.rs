//! Error type shared by all modules.

use thiserror::Error;

use crate::linear::IterationTrace;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (grid resolution, tolerance ranges,
    /// nearness constants out of their admissible intervals, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite or malformed input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    /// Operands live on different grids or have incompatible dimensions.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Torus compatibility condition violated (nonzero-mean right-hand side).
    #[error("solvability error: {0}")]
    Solvability(String),

    /// Input degenerate for the requested quantity (e.g. a constant field
    /// where a second-derivative ratio is measured).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Coefficient field with vanishing `Σ c_ij²` somewhere on the grid.
    #[error("degenerate coefficients: {0}")]
    DegenerateCoefficients(String),

    /// The Cordes gate rejected the coefficient field before iterating.
    #[error("Cordes check failed: {0}")]
    CordesFailed(String),

    /// Iteration budget exhausted; the trace collected so far is attached.
    #[error("no convergence after {} iterations (final residual {:e})",
            trace.iterations, trace.final_residual())]
    NonConvergence { trace: Box<IterationTrace> },

    #[error("empty sample")]
    EmptySample,

    /// A sampled operator pair with vanishing reference difference.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Fiberwise system matrix is singular (or numerically unusable) at the
    /// chosen truncation.
    #[error("singular truncation: {0}")]
    SingularTruncation(String),

    /// The singular-value iteration behind a norm computation failed.
    #[error("norm computation did not converge")]
    NormNonConvergence,
}
