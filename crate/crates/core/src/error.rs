//! Crate-wide error type.

use thiserror::Error;

/// Which of the two invertibility conditions of the tracking lemma failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopCondition {
    /// `det(I - (A + BK))` — the state loop.
    StateLoop,
    /// `det(I - F)` — the compensator loop.
    CompensatorLoop,
}

impl std::fmt::Display for LoopCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoopCondition::StateLoop => write!(f, "det(I - (A + BK))"),
            LoopCondition::CompensatorLoop => write!(f, "det(I - F)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("problem is infeasible")]
    Infeasible,

    #[error(
        "iteration limit reached before certification \
         (eq residual {eq_residual:.3e}, bound violation {ineq_violation:.3e}, gap {gap:.3e})"
    )]
    IterLimit {
        eq_residual: f64,
        ineq_violation: f64,
        gap: f64,
    },

    #[error("numerical failure in the LP solver: {0}")]
    Numerical(String),

    #[error("solution invalid for realization: X0 deviates from identity by {deviation:.3e}")]
    X0Deviation { deviation: f64 },

    #[error("realized gains do not satisfy the defining equation: residual {residual:.3e}")]
    RealizationResidual { residual: f64 },

    #[error("tracking condition {which} is numerically singular: det = {det:.3e}")]
    SingularCondition { which: LoopCondition, det: f64 },

    #[error("DC gain C (I - (A+BK))^-1 B is singular; reference cannot be tracked")]
    DcGainSingular,

    #[error("tracking rank condition fails: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("state diverged (non-finite) at step {step}")]
    Divergence { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
