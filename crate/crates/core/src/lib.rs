//! Stochastic logistic population model with mate limitation and
//! immigration: exact stationary law, mode analysis, transient dynamics,
//! simulation, large-`N` threshold and the deterministic limit.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod chain;
pub mod deterministic;
pub mod error;
pub mod logspace;
pub mod master_eq;
pub mod mode_cubic;
pub mod model;
pub mod ode;
pub mod presets;
pub mod quadrature;
pub mod roots;
pub mod ssa;
pub mod stationary;

pub use error::{AlleeError, Result};
pub use model::{
    basic_reproduction_ratio, birth_rate, check_assumptions, death_rate, equilibria,
    AssumptionReport, EquilibriumPair, ImmigrationSpec, ModelParams,
};
pub use stationary::{mode_profile, psd_product, StationaryDistribution};
