//! Real roots of a cubic polynomial.

use std::f64::consts::PI;

/// Coefficients of `c3 x³ + c2 x² + c1 x + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CubicSolution {
    /// Ascending.
    ThreeReal([f64; 3]),
    /// A single real root; the others form a complex pair.
    OneReal { root: f64, discriminant: f64 },
}

impl Cubic {
    pub fn new(c3: f64, c2: f64, c1: f64, c0: f64) -> Self {
        Self { c3, c2, c1, c0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        ((self.c3 * x + self.c2) * x + self.c1) * x + self.c0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (3.0 * self.c3 * x + 2.0 * self.c2) * x + self.c1
    }

    /// `18abcd - 4b³d + b²c² - 4ac³ - 27a²d²`; positive iff three distinct
    /// real roots.
    pub fn discriminant(&self) -> f64 {
        let (a, b, c, d) = (self.c3, self.c2, self.c1, self.c0);
        18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
            - 4.0 * a * c.powi(3)
            - 27.0 * a * a * d * d
    }

    fn polish(&self, x: f64) -> f64 {
        let f = self.eval(x);
        let df = self.derivative(x);
        if df == 0.0 || !df.is_finite() {
            return x;
        }
        let y = x - f / df;
        if self.eval(y).abs() <= f.abs() {
            y
        } else {
            x
        }
    }

    /// Closed-form roots of the depressed cubic, each refined by one Newton
    /// step. `c3` must be non-zero.
    pub fn solve(&self) -> CubicSolution {
        assert!(self.c3 != 0.0, "leading coefficient must be non-zero");
        let b = self.c2 / self.c3;
        let c = self.c1 / self.c3;
        let d = self.c0 / self.c3;
        // x = t - b/3  ->  t³ + p t + q = 0
        let shift = b / 3.0;
        let p = c - b * b / 3.0;
        let q = 2.0 * b.powi(3) / 27.0 - b * c / 3.0 + d;
        let disc = self.discriminant();

        if disc > 0.0 && p < 0.0 {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            let mut r = [0.0; 3];
            for (k, slot) in r.iter_mut().enumerate() {
                let t = m * (phi - 2.0 * PI * k as f64 / 3.0).cos();
                *slot = self.polish(t - shift);
            }
            r.sort_by(|x, y| x.total_cmp(y));
            CubicSolution::ThreeReal(r)
        } else {
            let h = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
            let t = (-q / 2.0 + h).cbrt() + (-q / 2.0 - h).cbrt();
            CubicSolution::OneReal {
                root: self.polish(t - shift),
                discriminant: disc,
            }
        }
    }

    /// All real roots, ascending.
    pub fn real_roots(&self) -> Vec<f64> {
        match self.solve() {
            CubicSolution::ThreeReal(r) => r.to_vec(),
            CubicSolution::OneReal { root, .. } => vec![root],
        }
    }
}
