//! Large-`N` behaviour of the stationary law.
//!
//! `(1/N) log(p_{i+} / p_0)` tends to `∫₀^{x+*} log f(x) dx` with
//!
//! ```text
//! f(x) = R0 (1 - δ1 x) / (1 + δ2 x + δ3 θ / (θ + x)),
//! ```
//!
//! and the sign of that integral decides whether the stationary density
//! collapses onto `0` or onto `x+*`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlleeError, Result};
use crate::logspace::logsumexp;
use crate::model::{equilibria, require_assumptions, ModelParams};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::stationary::{mode_profile, psd_product};

pub const DEFAULT_CRITICAL_TOLERANCE: f64 = 1e-7;

pub fn f_of_x(params: &ModelParams, x: f64) -> f64 {
    let th = params.theta;
    params.r0() * (1.0 - params.delta1 * x)
        / (1.0 + params.delta2 * x + params.delta3 * th / (th + x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Extinction,
    Persistence,
    Critical,
}

impl Classification {
    pub fn from_integral(value: f64, tolerance: f64) -> Self {
        if value < -tolerance {
            Self::Extinction
        } else if value > tolerance {
            Self::Persistence
        } else {
            Self::Critical
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub integral_value: f64,
    pub quadrature_error: f64,
    pub classification: Classification,
    pub tolerance: f64,
    pub x_plus: f64,
}

pub fn markov_exponent(params: &ModelParams) -> Result<ThresholdReport> {
    markov_exponent_with(
        params,
        DEFAULT_CRITICAL_TOLERANCE,
        QuadratureOptions::default(),
    )
}

/// `∫₀^{x+*} log f(x) dx` and its sign classification. Requires (A1), (A2)
/// and (H).
pub fn markov_exponent_with(
    params: &ModelParams,
    critical_tolerance: f64,
    quadrature: QuadratureOptions,
) -> Result<ThresholdReport> {
    require_assumptions(params)?;
    let x_plus = equilibria(params)?.x_plus;
    let q = integrate(|x| f_of_x(params, x).ln(), 0.0, x_plus, quadrature)?;
    Ok(ThresholdReport {
        integral_value: q.value,
        quadrature_error: q.error_estimate,
        classification: Classification::from_integral(q.value, critical_tolerance),
        tolerance: critical_tolerance,
        x_plus,
    })
}

/// `(1/N) log(p_{i+} / p_0)` at capacity `n`.
pub fn discrete_markov_exponent(params: &ModelParams, n: usize) -> Result<f64> {
    let p = params.with_capacity(n)?;
    let dist = psd_product(&p)?;
    let i_plus = mode_profile(&dist)
        .i_plus
        .ok_or(AlleeError::NoPersistenceMode)?;
    Ok((dist.log_weights[i_plus] - dist.log_weights[0]) / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub n: usize,
    /// `P[Y_N > ε]` in the extinction regime, `P[|Y_N - x+*| > ε]` otherwise.
    pub tail_mass: f64,
    pub discrete_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostic {
    pub regime: Classification,
    pub epsilon: f64,
    pub x_plus: f64,
    pub rows: Vec<DiagnosticRow>,
    pub warning: Option<String>,
}

impl ConvergenceDiagnostic {
    /// Columns `N,tail_mass,discrete_exponent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,tail_mass,discrete_exponent\n");
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.n, r.tail_mass, r.discrete_exponent).unwrap();
        }
        out
    }
}

/// Exact stationary tail mass away from the limiting point, one row per `N`.
/// A critical classification falls back to the extinction tail and records
/// a warning.
pub fn limit_distribution_diagnostic(
    params: &ModelParams,
    n_list: &[usize],
    epsilon: f64,
) -> Result<ConvergenceDiagnostic> {
    if !(epsilon > 0.0) {
        return Err(AlleeError::InvalidParameter(format!(
            "epsilon = {epsilon} must be > 0"
        )));
    }
    let report = markov_exponent(params)?;
    let x_plus = report.x_plus;
    let (regime, warning) = match report.classification {
        Classification::Critical => (
            Classification::Extinction,
            Some(format!(
                "integral {:e} is within the critical band ±{:e}; no limit regime applies, extinction tail reported",
                report.integral_value, report.tolerance
            )),
        ),
        c => (c, None),
    };

    let rows = n_list
        .par_iter()
        .map(|&n| {
            let p = params.with_capacity(n)?;
            let dist = psd_product(&p)?;
            let nf = n as f64;
            let outside = |i: usize| {
                let y = i as f64 / nf;
                match regime {
                    Classification::Persistence => (y - x_plus).abs() > epsilon,
                    _ => y > epsilon,
                }
            };
            let tail: Vec<f64> = dist
                .log_weights
                .iter()
                .enumerate()
                .filter(|(i, _)| outside(*i))
                .map(|(_, w)| *w)
                .collect();
            let tail_mass = (logsumexp(&tail) - logsumexp(&dist.log_weights))
                .exp()
                .min(1.0);
            let i_plus = mode_profile(&dist)
                .i_plus
                .ok_or(AlleeError::NoPersistenceMode)?;
            Ok(DiagnosticRow {
                n,
                tail_mass,
                discrete_exponent: (dist.log_weights[i_plus] - dist.log_weights[0]) / nf,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ConvergenceDiagnostic {
        regime,
        epsilon,
        x_plus,
        rows,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2a(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.4, 1.0, 0.45, 0.1, 1.45, 0.03, n, 0.99).unwrap()
    }

    fn fig2b(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.7, 1.0, 0.9, 0.0, 1.7, 0.03, n, 0.99).unwrap()
    }

    #[test]
    fn f_at_zero_and_equilibria() {
        let p = fig2a(100);
        assert!((f_of_x(&p, 0.0) - 1.4 / 2.45).abs() < 1e-15);
        assert!((f_of_x(&p, 0.0) - 0.571429).abs() < 1e-6);
        for q in [fig2a(100), fig2b(100)] {
            let e = equilibria(&q).unwrap();
            assert!((f_of_x(&q, e.x_plus) - 1.0).abs() < 1e-12);
            assert!((f_of_x(&q, e.x_minus) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_f_sign_pattern() {
        for q in [fig2a(100), fig2b(100)] {
            let e = equilibria(&q).unwrap();
            for k in 1..=2000 {
                let x = k as f64 / 2000.0;
                if (x - e.x_minus).abs() < 1e-6 || (x - e.x_plus).abs() < 1e-6 {
                    continue;
                }
                let lf = f_of_x(&q, x).ln();
                if x > e.x_minus && x < e.x_plus {
                    assert!(lf > 0.0, "x = {x}");
                } else {
                    assert!(lf < 0.0, "x = {x}");
                }
            }
        }
    }

    #[test]
    fn integral_golden_values() {
        let a = markov_exponent(&fig2a(5000)).unwrap();
        assert!((a.integral_value + 0.00611319).abs() < 1e-6);
        assert_eq!(a.classification, Classification::Extinction);
        let b = markov_exponent(&fig2b(5000)).unwrap();
        assert!((b.integral_value - 0.0207001).abs() < 1e-6);
        assert_eq!(b.classification, Classification::Persistence);
        // Integrand vanishes at the upper limit.
        assert!(f_of_x(&fig2a(10), a.x_plus).ln().abs() < 1e-12);
    }

    #[test]
    fn classification_bands() {
        assert_eq!(
            Classification::from_integral(-1e-6, 1e-7),
            Classification::Extinction
        );
        assert_eq!(
            Classification::from_integral(1e-6, 1e-7),
            Classification::Persistence
        );
        assert_eq!(
            Classification::from_integral(5e-8, 1e-7),
            Classification::Critical
        );
        assert_eq!(
            Classification::from_integral(-1e-7, 1e-7),
            Classification::Critical
        );
    }

    #[test]
    fn requires_assumptions() {
        let p = ModelParams::with_constant_immigration(1.4, 1.0, 0.0, 0.0, 1.45, 0.03, 50, 0.5)
            .unwrap();
        assert!(matches!(
            markov_exponent(&p),
            Err(AlleeError::AssumptionFailure(_))
        ));
    }

    #[test]
    fn discrete_exponent_is_a_log_weight_difference() {
        let p = fig2b(300);
        let d = psd_product(&p).unwrap();
        let ip = mode_profile(&d).i_plus.unwrap();
        let direct = (d.probs[ip] / d.probs[0]).ln() / 300.0;
        assert!((discrete_markov_exponent(&p, 300).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn discrete_exponent_approaches_integral() {
        for (p, target) in [(fig2a(10), -0.00611319), (fig2b(10), 0.0207001)] {
            let mut prev = f64::INFINITY;
            for n in [500, 2000, 8000] {
                let gap = (discrete_markov_exponent(&p, n).unwrap() - target).abs();
                assert!(gap < prev, "N = {n}: {gap}");
                prev = gap;
            }
        }
    }

    #[test]
    fn tail_mass_vanishes_beyond_unit_density() {
        let d = limit_distribution_diagnostic(&fig2a(10), &[100, 200], 1.0).unwrap();
        assert!(d.rows.iter().all(|r| r.tail_mass == 0.0));
        assert!(d.warning.is_none());
        assert!(limit_distribution_diagnostic(&fig2a(10), &[100], 0.0).is_err());
    }

    #[test]
    fn diagnostic_csv() {
        let d = limit_distribution_diagnostic(&fig2b(10), &[200, 400], 0.05).unwrap();
        assert_eq!(d.regime, Classification::Persistence);
        let csv = d.to_csv();
        assert!(csv.starts_with("N,tail_mass,discrete_exponent\n200,"));
        assert_eq!(csv.lines().count(), 3);
        assert!(d.rows[1].tail_mass < d.rows[0].tail_mass);
    }

    #[test]
    fn scale_invariance() {
        let base = fig2a(200);
        let mut scaled = base.clone();
        scaled.lambda *= 3.7;
        scaled.mu *= 3.7;
        let (e1, e2) = (equilibria(&base).unwrap(), equilibria(&scaled).unwrap());
        assert!((e1.x_plus - e2.x_plus).abs() < 1e-14);
        assert!((e1.x_minus - e2.x_minus).abs() < 1e-14);
        let (m1, m2) = (
            markov_exponent(&base).unwrap(),
            markov_exponent(&scaled).unwrap(),
        );
        assert!((m1.integral_value - m2.integral_value).abs() < 1e-14);
        for x in [0.0, 0.1, 0.5, 1.0] {
            assert!((f_of_x(&base, x) - f_of_x(&scaled, x)).abs() < 1e-14);
        }
        let (d1, d2) = (psd_product(&base).unwrap(), psd_product(&scaled).unwrap());
        for (a, b) in d1.probs.iter().zip(&d2.probs) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300);
        }
    }
}
