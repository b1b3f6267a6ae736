//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while building or solving the model.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameter validation failed (negative rate, zero cavity width, ...).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An operator or state has the wrong dimension for this space.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The Liouvillian null space has more than one direction, so no unique
    /// steady state exists (disconnected sectors, e.g. g = gamma = 0).
    #[error("steady state is not unique: null-space dimension {null_dim}")]
    NonUniqueSteadyState { null_dim: usize },

    /// A linear solve hit a singular matrix.
    #[error("linear system is singular")]
    SingularSystem,

    /// The adaptive integrator could not meet its tolerance.
    #[error("integrator step size underflowed at t = {t:.6e}")]
    IntegrationFailure { t: f64 },

    /// The requested frequency grid cannot resolve the narrowest linewidth.
    #[error("frequency grid too coarse: spacing {spacing:.4e} exceeds limit {limit:.4e}")]
    InsufficientGrid { spacing: f64, limit: f64 },

    /// Correlation channels need at least two total quanta in the basis.
    #[error("correlation channels need n_max >= 2, got {n_max}")]
    ChannelUnavailable { n_max: usize },

    /// An undamped mode carries spectral weight, so the resolvent diverges.
    #[error("resolvent singular at omega = {omega:.6e}: undamped mode carries weight")]
    SingularResolvent { omega: f64 },

    /// A conditioned state leaked into the top quanta shell; raise n_max.
    #[error("top quanta shell population {population:.3e} at t = {t:.4}; raise n_max")]
    TruncationOverflow { population: f64, t: f64 },

    /// A correlation window ended before the correlation decayed away.
    #[error("correlation not decayed: terminal magnitude {terminal_ratio:.3e} of initial")]
    DecayIncomplete { terminal_ratio: f64 },

    /// Two tabulated spectra do not share a frequency grid.
    #[error("frequency grids do not match")]
    GridMismatch,

    /// The LAPACK backend reported a failure.
    #[error("linear algebra backend: {0}")]
    Backend(String),

    /// Any other numerical breakdown worth a diagnostic.
    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
