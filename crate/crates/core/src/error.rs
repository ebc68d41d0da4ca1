use thiserror::Error;

use crate::model::AssumptionReport;

#[derive(Debug, Error)]
pub enum AlleeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state index {index} out of range 0..={capacity}")]
    StateOutOfRange { index: usize, capacity: usize },

    #[error("model assumptions violated: {}", .0.messages.join("; "))]
    AssumptionFailure(Box<AssumptionReport>),

    #[error("immigration into the empty state is zero; state 0 is absorbing and the stationary distribution is degenerate")]
    DegenerateDistribution,

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("cubic has a complex-conjugate root pair (discriminant {discriminant:e})")]
    ComplexRoots { discriminant: f64 },

    #[error("uniformization did not reach tolerance {tolerance:e} within {terms} Poisson terms")]
    ToleranceUnachievable { tolerance: f64, terms: usize },

    #[error(
        "no convergence within horizon {horizon}: total variation {achieved:e} > {tolerance:e}"
    )]
    BudgetExceeded {
        achieved: f64,
        horizon: f64,
        tolerance: f64,
    },

    #[error("quadrature failed: estimated error {estimate:e} after {intervals} subintervals")]
    QuadratureFailure { estimate: f64, intervals: usize },

    #[error("ODE integration failed: {0}")]
    IntegrationFailure(String),

    #[error("no persistence mode found in the stationary distribution")]
    NoPersistenceMode,

    #[error("empty observation window: burn-in {burn_in} >= trajectory end {t_end}")]
    EmptyWindow { burn_in: f64, t_end: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AlleeError>;
