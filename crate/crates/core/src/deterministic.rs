//! Deterministic counterparts of the chain: the density ODE (bistable, with
//! basins split at `x-*`) and the variant with constant immigration.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlleeError, Result};
use crate::model::{equilibria, ModelParams};
use crate::ode::{integrate_scalar, StepControl};
use crate::roots::Cubic;

/// `λ x (1 - δ1 x) - μ x [1 + δ2 x + δ3 θ / (θ + x)]`
pub fn ode_rhs(params: &ModelParams, x: f64) -> f64 {
    immigration_ode_rhs(params, 0.0, x)
}

/// `ode_rhs + α (1 - x)`
pub fn immigration_ode_rhs(params: &ModelParams, alpha: f64, x: f64) -> f64 {
    let th = params.theta;
    params.lambda * x * (1.0 - params.delta1 * x) + alpha * (1.0 - x)
        - params.mu * x * (1.0 + params.delta2 * x + params.delta3 * th / (th + x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Extinction,
    CarryingCapacity,
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub densities: Vec<f64>,
    pub terminal: Terminal,
}

impl OdeTrajectory {
    /// Columns `t,x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x\n");
        for (t, x) in self.times.iter().zip(&self.densities) {
            writeln!(out, "{t},{x}").unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub step: StepControl,
    /// Terminal distance to `0` or `x+*` that counts as converged.
    pub proximity: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            step: StepControl::default(),
            proximity: 1e-6,
        }
    }
}

pub fn integrate(params: &ModelParams, x0: f64, t_end: f64) -> Result<OdeTrajectory> {
    integrate_with(params, x0, t_end, OdeOptions::default())
}

pub fn integrate_with(
    params: &ModelParams,
    x0: f64,
    t_end: f64,
    options: OdeOptions,
) -> Result<OdeTrajectory> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(AlleeError::InvalidParameter(format!(
            "initial density {x0} must lie in [0, 1]"
        )));
    }
    let (times, densities) = integrate_scalar(|x| ode_rhs(params, x), x0, t_end, options.step)?;
    let end = *densities.last().unwrap();
    let x_plus = equilibria(params).ok().map(|e| e.x_plus);
    let terminal = if end.abs() < options.proximity {
        Terminal::Extinction
    } else if x_plus.is_some_and(|xp| (end - xp).abs() < options.proximity) {
        Terminal::CarryingCapacity
    } else {
        Terminal::Undecided
    };
    Ok(OdeTrajectory {
        times,
        densities,
        terminal,
    })
}

/// Terminal classification for each initial density, in input order.
pub fn basin_sweep(params: &ModelParams, x0_grid: &[f64], t_end: f64) -> Result<Vec<Terminal>> {
    x0_grid
        .par_iter()
        .map(|&x0| integrate(params, x0, t_end).map(|tr| tr.terminal))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub x: f64,
    /// Central-difference slope of the right-hand side at `x`.
    pub slope: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmigrationEquilibria {
    pub alpha: f64,
    /// Real roots of the equilibrium cubic, ascending.
    pub roots: Vec<EquilibriumPoint>,
}

/// `(λδ1 + μδ2) x³ + [θ(λδ1 + μδ2) + α + μ - λ] x² + [θ(μδ3 + α + μ - λ) - α] x - αθ`,
/// the right-hand side times `-(θ + x)`.
pub fn immigration_cubic(params: &ModelParams, alpha: f64) -> Cubic {
    let (l, m, th) = (params.lambda, params.mu, params.theta);
    let k = l * params.delta1 + m * params.delta2;
    Cubic::new(
        k,
        th * k + alpha + m - l,
        th * (m * params.delta3 + alpha + m - l) - alpha,
        -alpha * th,
    )
}

const SLOPE_STEP: f64 = 1e-7;

/// Real equilibria of the immigration ODE with stability read from the sign
/// of the slope of the right-hand side.
pub fn immigration_equilibria(params: &ModelParams, alpha: f64) -> Result<ImmigrationEquilibria> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(AlleeError::InvalidParameter(format!(
            "alpha = {alpha} must be finite and >= 0"
        )));
    }
    let cubic = immigration_cubic(params, alpha);
    let xs = if cubic.c3 != 0.0 {
        cubic.real_roots()
    } else {
        quadratic_roots(cubic.c2, cubic.c1, cubic.c0)?
    };
    let roots = xs
        .into_iter()
        .map(|x| {
            let slope = (immigration_ode_rhs(params, alpha, x + SLOPE_STEP)
                - immigration_ode_rhs(params, alpha, x - SLOPE_STEP))
                / (2.0 * SLOPE_STEP);
            let stability = if slope < 0.0 {
                Stability::Stable
            } else if slope > 0.0 {
                Stability::Unstable
            } else {
                Stability::Neutral
            };
            EquilibriumPoint {
                x,
                slope,
                stability,
            }
        })
        .collect();
    Ok(ImmigrationEquilibria { alpha, roots })
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Result<Vec<f64>> {
    if a == 0.0 {
        if b == 0.0 {
            return Err(AlleeError::InvalidParameter(
                "equilibrium polynomial is degenerate".into(),
            ));
        }
        return Ok(vec![-c / b]);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut r = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    r.sort_by(|x, y| x.total_cmp(y));
    Ok(r)
}
