//! The cubic whose roots locate the stationary modes.
//!
//! Setting the successive ratio `p_{i+1}/p_i` to one and writing `x = i/N`
//! gives, after clearing denominators, a cubic `h_N(x)` with `1/N`, `1/N²`
//! and `1/N³` corrections to the limiting cubic
//! `h(x) = -a x³ + b x² - c x` whose positive roots are `x-*` and `x+*`.

use serde::{Deserialize, Serialize};

use crate::error::{AlleeError, Result};
use crate::model::{equilibria, ModelParams};
use crate::roots::{Cubic, CubicSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicRoots {
    /// Negative root, state units.
    pub r0: f64,
    pub r_minus: f64,
    pub r_plus: f64,
}

/// `h_N(x)` for a state with scaled immigration `r1_at_i`.
pub fn mode_cubic(params: &ModelParams, r1_at_i: f64) -> Cubic {
    let r0 = params.r0();
    let (d1, d2, d3, th) = (params.delta1, params.delta2, params.delta3, params.theta);
    let r1 = r1_at_i;
    let n = params.capacity_n as f64;
    let a = r0 * d1 + d2;
    Cubic::new(
        -a,
        -((1.0 - r0 + th * a) + (3.0 * d2 + r0 * d1 + r1) / n),
        -(th * (1.0 + d3 - r0)
            + (2.0 * d2 * th + 2.0 - r0 + r1 * th - r1) / n
            + (3.0 * d2 + r1) / (n * n)),
        -((d3 + 1.0 - r1) * th / n + (1.0 + d2 * th - r1) / (n * n) + d2 / (n * n * n)),
    )
}

/// The `N -> ∞` cubic, roots `{0, x-*, x+*}`.
pub fn limiting_cubic(params: &ModelParams) -> Cubic {
    let (a, b, c) = params.quadratic_coefficients();
    Cubic::new(-a, b, -c, 0.0)
}

pub fn cubic_h_n(params: &ModelParams, r1_at_i: f64, x: f64) -> f64 {
    mode_cubic(params, r1_at_i).eval(x)
}

/// Roots of `h_N`, in state units (`N x`). Requires (A1) and an `N` large
/// enough for all three roots to be real.
pub fn solve_mode_cubic(params: &ModelParams, r1_at_i: f64) -> Result<CubicRoots> {
    equilibria(params)?;
    let n = params.capacity_n as f64;
    match mode_cubic(params, r1_at_i).solve() {
        CubicSolution::ThreeReal([r0, rm, rp]) => Ok(CubicRoots {
            r0: r0 * n,
            r_minus: rm * n,
            r_plus: rp * n,
        }),
        CubicSolution::OneReal { discriminant, .. } => {
            Err(AlleeError::ComplexRoots { discriminant })
        }
    }
}

/// Leading-order location of the negative root in state units,
/// `-(δ3 + 1 - R1) / (δ3 + 1 - R0)`.
pub fn negative_root_first_order(params: &ModelParams, r1_at_i: f64) -> f64 {
    -(params.delta3 + 1.0 - r1_at_i) / (params.delta3 + 1.0 - params.r0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn fig2a(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.4, 1.0, 0.45, 0.1, 1.45, 0.03, n, 0.99).unwrap()
    }

    fn fig2b(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.7, 1.0, 0.9, 0.0, 1.7, 0.03, n, 0.99).unwrap()
    }

    #[test]
    fn constant_term_is_negative() {
        for p in [fig2a(100), fig2b(37)] {
            for r1 in [0.0, 0.3, 0.99, 1.0] {
                let (d2, d3, th) = (p.delta2, p.delta3, p.theta);
                let n = p.n() as f64;
                let expected =
                    -((d3 + 1.0 - r1) * th / n + (1.0 + d2 * th - r1) / (n * n) + d2 / (n * n * n));
                let h0 = cubic_h_n(&p, r1, 0.0);
                assert_eq!(h0, expected);
                assert!(h0 < 0.0);
            }
        }
    }

    #[test]
    fn roots_are_where_the_successive_ratio_is_one() {
        // Independent route: bisection on b(i)/d(i+1) - 1 with i continuous.
        let p = fig2a(200);
        let (r0, d1, d2, d3, th, r1) = (1.4, 0.45, 0.1, 1.45, 0.03, 0.99);
        let n = 200.0;
        let ratio = |i: f64| {
            (r0 * i * (1.0 - d1 * i / n) + r1 * (n - i) / n)
                / ((i + 1.0) * (1.0 + d2 * (i + 1.0) / n + d3 * th / (th + (i + 1.0) / n)))
                - 1.0
        };
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (ratio(lo) > 0.0) == (ratio(mid) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let roots = solve_mode_cubic(&p, r1).unwrap();
        assert!((roots.r_minus - bisect(5.0, 50.0)).abs() < 1e-8);
        assert!((roots.r_plus - bisect(50.0, 150.0)).abs() < 1e-8);
        assert!(roots.r0 < 0.0);
    }

    #[test]
    fn converges_to_equilibria() {
        let roots = solve_mode_cubic(&fig2a(5000), 0.99).unwrap();
        assert!((roots.r_plus / 5000.0 - 0.413621).abs() < 0.002);
        assert!(roots.r0 < 0.0 && roots.r0 < roots.r_minus && roots.r_minus < roots.r_plus);

        let e = crate::model::equilibria(&fig2a(5000)).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1000, 2000, 4000, 8000, 16000] {
            let r = solve_mode_cubic(&fig2a(n), 0.99).unwrap();
            let err = (r.r_plus / n as f64 - e.x_plus).abs();
            // O(1/N): the error times N stays bounded and the error halves.
            assert!(err * (n as f64) < 5.0);
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn negative_root_matches_leading_order() {
        for p in [fig2a(100_000), fig2b(100_000)] {
            let r = solve_mode_cubic(&p, 0.99).unwrap();
            let lead = negative_root_first_order(&p, 0.99);
            assert!((r.r0 - lead).abs() < 1e-3, "{} vs {}", r.r0, lead);
        }
    }

    #[test]
    fn limiting_cubic_roots() {
        for p in [fig2a(100), fig2b(100)] {
            let e = crate::model::equilibria(&p).unwrap();
            let h = limiting_cubic(&p);
            assert!(h.eval(e.x_minus).abs() < 1e-15);
            assert!(h.eval(e.x_plus).abs() < 1e-15);
            let r = h.real_roots();
            assert!(r[0].abs() < 1e-14);
            assert!((r[1] - e.x_minus).abs() < 1e-12);
            assert!((r[2] - e.x_plus).abs() < 1e-12);
        }
    }

    #[test]
    fn nondegenerate_derivative_at_equilibria() {
        for p in [fig2a(100), fig2b(100)] {
            let e = crate::model::equilibria(&p).unwrap();
            let (a, b, c) = (e.a, e.b, e.c);
            let s = (b * b - 4.0 * a * c).sqrt();
            let lhs_plus = 3.0 * a * e.x_plus * e.x_plus - 2.0 * b * e.x_plus + c;
            let lhs_minus = 3.0 * a * e.x_minus * e.x_minus - 2.0 * b * e.x_minus + c;
            assert!((lhs_plus - 2.0 * c * s / (b - s)).abs() < 1e-12);
            assert!((lhs_minus + 2.0 * c * s / (b + s)).abs() < 1e-12);
            assert!(lhs_plus.abs() > 1e-3 && lhs_minus.abs() > 1e-3);
        }
    }

    #[test]
    fn small_n_can_lose_real_roots() {
        // With only a handful of states the corrections dominate.
        let p = ModelParams::with_constant_immigration(1.4, 1.0, 0.45, 0.1, 1.45, 0.03, 2, 0.99)
            .unwrap();
        match solve_mode_cubic(&p, 0.99) {
            Err(AlleeError::ComplexRoots { discriminant }) => assert!(discriminant <= 0.0),
            Ok(r) => panic!("expected a complex pair, got {r:?}"),
            Err(e) => panic!("{e}"),
        }
    }
}
