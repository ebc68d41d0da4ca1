//! Dormand–Prince 5(4) integrator for scalar autonomous ODEs. Stage times
//! are not needed since the right-hand side does not depend on `t`.

use crate::error::{AlleeError, Result};

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            initial_step: 1e-3,
            max_step: 10.0,
            max_steps: 1_000_000,
        }
    }
}

/// Accepted steps `(t, x)` including the initial point and `t_end`.
pub fn integrate_scalar<F: Fn(f64) -> f64>(
    f: F,
    x0: f64,
    t_end: f64,
    control: StepControl,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(AlleeError::IntegrationFailure(format!(
            "t_end = {t_end} must be finite and >= 0"
        )));
    }
    let mut times = vec![0.0];
    let mut xs = vec![x0];
    let (mut t, mut x) = (0.0, x0);
    let mut h = control.initial_step.min(t_end);
    let mut k = [0.0; 7];
    k[0] = f(x);
    let mut steps = 0usize;
    while t < t_end {
        if steps >= control.max_steps {
            return Err(AlleeError::IntegrationFailure(format!(
                "step budget {} exhausted at t = {t}",
                control.max_steps
            )));
        }
        steps += 1;
        h = h.min(t_end - t).min(control.max_step);
        for s in 1..7 {
            let mut xi = x;
            for j in 0..s {
                xi += h * A[s][j] * k[j];
            }
            k[s] = f(xi);
        }
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        let mut x_new = x;
        for j in 0..6 {
            x_new += h * A[6][j] * k[j];
        }
        let err_abs = h * E.iter().zip(&k).map(|(e, ki)| e * ki).sum::<f64>();
        let scale = control.atol + control.rtol * x.abs().max(x_new.abs());
        let err = (err_abs / scale).abs();
        if !x_new.is_finite() || !err.is_finite() {
            return Err(AlleeError::IntegrationFailure(format!(
                "non-finite state at t = {t}"
            )));
        }
        if err <= 1.0 {
            t = if t_end - (t + h) < 1e-12 * t_end.max(1.0) {
                t_end
            } else {
                t + h
            };
            x = x_new;
            k[0] = k[6];
            times.push(t);
            xs.push(x);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * t.max(1.0) {
            return Err(AlleeError::IntegrationFailure(format!(
                "step size underflow at t = {t}"
            )));
        }
    }
    Ok((times, xs))
}
