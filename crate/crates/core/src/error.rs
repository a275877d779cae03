use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    /// A numerical invariant that must hold by construction did not; points at
    /// a bug or insufficient working precision.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("jacobian is singular or ill-conditioned (condition estimate {condition:e})")]
    Conditioning { condition: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("random search drew no valid sample out of {samples}")]
    NoCandidate { samples: usize },

    #[error("{0} is outside the domain of the bound")]
    OutOfDomain(String),

    #[error("branch degeneracy: |F(0)| = {abs_a0} is too close to 1")]
    BranchDegeneracy { abs_a0: f64 },

    #[error("flatness order undetermined: all coefficients up to order {order} are below {tol:e}")]
    IndeterminateOrder { order: usize, tol: f64 },

    #[error("eigenvalue collision: |trace/2| = {half_trace}")]
    DegenerateSpectrum { half_trace: f64 },

    #[error("quadrature did not reach the requested accuracy (estimate {estimate:e})")]
    Accuracy { estimate: f64 },

    #[error("stationary-phase order {0} is not supported (only even orders)")]
    UnsupportedOrder(usize),

    #[error("invalid sample: {0}")]
    InvalidSample(String),
}
