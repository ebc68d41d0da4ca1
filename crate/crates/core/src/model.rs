//! Model constants, birth/death rates and the deterministic equilibria.
//!
//! States are population counts `0..=N`. With density `x = i/N` the rates are
//!
//! ```text
//! b(i) = λ i (1 - δ1 i/N) + α_i (N - i),   i < N,     b(N) = 0
//! d(i) = μ i (1 + δ2 i/N + δ3 θ / (θ + i/N))
//! ```
//!
//! where the immigration rate `α_i = μ R1_i / N` is derived from the
//! dimensionless schedule `R1_i` stored in [`ImmigrationSpec`].

use serde::{Deserialize, Serialize};

use crate::error::{AlleeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationSpec {
    r1: Vec<f64>,
}

impl ImmigrationSpec {
    /// One scaled rate per state `0..N`; state `N` never receives immigrants.
    pub fn new(r1: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = r1
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(AlleeError::InvalidParameter(format!(
                "immigration R1[{i}] = {v} must be finite and non-negative"
            )));
        }
        Ok(Self { r1 })
    }

    pub fn constant(value: f64, capacity_n: usize) -> Result<Self> {
        Self::new(vec![value; capacity_n])
    }

    pub fn r1(&self) -> &[f64] {
        &self.r1
    }

    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
    }

    /// `Some(v)` when every entry equals `v`.
    pub fn as_constant(&self) -> Option<f64> {
        let first = *self.r1.first()?;
        self.r1.iter().all(|&v| v == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub theta: f64,
    pub capacity_n: usize,
    pub immigration: ImmigrationSpec,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: f64,
        mu: f64,
        delta1: f64,
        delta2: f64,
        delta3: f64,
        theta: f64,
        capacity_n: usize,
        immigration: ImmigrationSpec,
    ) -> Result<Self> {
        let p = Self {
            lambda,
            mu,
            delta1,
            delta2,
            delta3,
            theta,
            capacity_n,
            immigration,
        };
        p.validate()?;
        Ok(p)
    }

    /// Constant immigration schedule `R1_i = r1` for every `i < N`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_constant_immigration(
        lambda: f64,
        mu: f64,
        delta1: f64,
        delta2: f64,
        delta3: f64,
        theta: f64,
        capacity_n: usize,
        r1: f64,
    ) -> Result<Self> {
        let immigration = ImmigrationSpec::constant(r1, capacity_n)?;
        Self::new(
            lambda,
            mu,
            delta1,
            delta2,
            delta3,
            theta,
            capacity_n,
            immigration,
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AlleeError::InvalidParameter(msg));
        let finite = [
            self.lambda,
            self.mu,
            self.delta1,
            self.delta2,
            self.delta3,
            self.theta,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("all rate constants must be finite".into());
        }
        if self.lambda <= 0.0 {
            return bad(format!("lambda = {} must be > 0", self.lambda));
        }
        if self.mu <= 0.0 {
            return bad(format!("mu = {} must be > 0", self.mu));
        }
        if !(0.0..=1.0).contains(&self.delta1) {
            return bad(format!("delta1 = {} must lie in [0, 1]", self.delta1));
        }
        if self.delta2 < 0.0 {
            return bad(format!("delta2 = {} must be >= 0", self.delta2));
        }
        if self.delta3 <= 0.0 {
            return bad(format!("delta3 = {} must be > 0", self.delta3));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta = {} must lie in (0, 1]", self.theta));
        }
        if self.capacity_n < 2 {
            return bad(format!("N = {} must be >= 2", self.capacity_n));
        }
        if self.immigration.len() != self.capacity_n {
            return bad(format!(
                "immigration schedule has {} entries, expected N = {}",
                self.immigration.len(),
                self.capacity_n
            ));
        }
        Ok(())
    }

    /// Same constants with a different capacity. A constant schedule is
    /// re-filled; a per-state schedule cannot be resized.
    pub fn with_capacity(&self, capacity_n: usize) -> Result<Self> {
        let r1 = self.immigration.as_constant().ok_or_else(|| {
            AlleeError::InvalidParameter("cannot resize a non-constant immigration schedule".into())
        })?;
        let immigration = ImmigrationSpec::constant(r1, capacity_n)?;
        Self::new(
            self.lambda,
            self.mu,
            self.delta1,
            self.delta2,
            self.delta3,
            self.theta,
            capacity_n,
            immigration,
        )
    }

    pub fn n(&self) -> usize {
        self.capacity_n
    }

    pub fn r0(&self) -> f64 {
        basic_reproduction_ratio(self)
    }

    /// Immigration rate per vacant slot, `α_i(N) = μ R1_i / N`. Zero at `i = N`.
    pub fn alpha(&self, i: usize) -> f64 {
        match self.immigration.r1().get(i) {
            Some(r1) => self.mu * r1 / self.capacity_n as f64,
            None => 0.0,
        }
    }

    /// Scaled immigration `R1_i`, zero at `i = N`.
    pub fn r1_at(&self, i: usize) -> f64 {
        self.immigration.r1().get(i).copied().unwrap_or(0.0)
    }

    /// Coefficients `a, b, c` of `a x² - b x + c = 0`, whose roots are the
    /// positive equilibria of the density ODE.
    pub fn quadratic_coefficients(&self) -> (f64, f64, f64) {
        let r0 = self.r0();
        let a = r0 * self.delta1 + self.delta2;
        let b = r0 - 1.0 - self.theta * a;
        let c = self.theta * (1.0 + self.delta3 - r0);
        (a, b, c)
    }

    /// `[1 - R0 - θ(R0 δ1 + δ2)]² - 4 θ δ3 (δ1 R0 + δ2)`.
    pub fn discriminant(&self) -> f64 {
        let r0 = self.r0();
        let a = r0 * self.delta1 + self.delta2;
        let s = 1.0 - r0 - self.theta * a;
        s * s - 4.0 * self.theta * self.delta3 * a
    }
}

pub fn basic_reproduction_ratio(params: &ModelParams) -> f64 {
    params.lambda / params.mu
}

fn check_index(params: &ModelParams, i: usize) -> Result<()> {
    if i > params.capacity_n {
        return Err(AlleeError::StateOutOfRange {
            index: i,
            capacity: params.capacity_n,
        });
    }
    Ok(())
}

pub fn birth_rate(params: &ModelParams, i: usize) -> Result<f64> {
    check_index(params, i)?;
    Ok(birth_rate_unchecked(params, i))
}

pub fn death_rate(params: &ModelParams, i: usize) -> Result<f64> {
    check_index(params, i)?;
    Ok(death_rate_unchecked(params, i))
}

pub(crate) fn birth_rate_unchecked(params: &ModelParams, i: usize) -> f64 {
    let n = params.capacity_n;
    if i >= n {
        return 0.0;
    }
    let nf = n as f64;
    let fi = i as f64;
    params.lambda * fi * (1.0 - params.delta1 * fi / nf) + params.alpha(i) * (n - i) as f64
}

pub(crate) fn death_rate_unchecked(params: &ModelParams, i: usize) -> f64 {
    let fi = i as f64;
    let x = fi / params.capacity_n as f64;
    params.mu * fi * (1.0 + params.delta2 * x + params.delta3 * params.theta / (params.theta + x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPair {
    pub x_minus: f64,
    pub x_plus: f64,
    pub discriminant: f64,
    /// `R0 δ1 + δ2`
    pub a: f64,
    /// `-[1 - R0 + θ(R0 δ1 + δ2)]`
    pub b: f64,
    /// `θ(1 + δ3 - R0)`
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_holds: bool,
    pub a1_inequality_chain: bool,
    pub a1_density_dependence: bool,
    pub a1_discriminant_positive: bool,
    pub a2_holds: bool,
    pub h_holds: bool,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.a1_holds && self.a2_holds && self.h_holds
    }
}

/// Evaluates (A1), (A2) and (H) with strict inequalities and no tolerance.
pub fn check_assumptions(params: &ModelParams) -> AssumptionReport {
    let r0 = params.r0();
    let (a, _, _) = params.quadratic_coefficients();
    let mut messages = Vec::new();

    let lower = 1.0 + params.theta * a;
    let upper = 1.0 + params.delta3;
    let chain = lower < r0 && r0 < upper;
    if !chain {
        messages.push(format!(
            "(A1) requires 1 + θ(R0δ1 + δ2) < R0 < 1 + δ3, got {lower} < {r0} < {upper}"
        ));
    }
    let dd = params.delta1 * params.delta1 + params.delta2 * params.delta2 > 0.0;
    if !dd {
        messages.push("(A1) requires δ1² + δ2² > 0".to_string());
    }
    let disc = params.discriminant();
    let disc_ok = disc > 0.0;
    if !disc_ok {
        messages.push(format!("(A1) requires Δ > 0, got Δ = {disc}"));
    }
    let a1 = chain && dd && disc_ok;

    let a2 = if a1 {
        let x_plus = equilibria_unchecked(params).x_plus;
        let ok = x_plus <= 1.0;
        if !ok {
            messages.push(format!("(A2) requires x+* <= 1, got {x_plus}"));
        }
        ok
    } else {
        messages.push("(A2) not evaluated: x+* undefined without (A1)".to_string());
        false
    };

    let bad_h: Vec<usize> = params
        .immigration
        .r1()
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(0.0..=1.0).contains(&v))
        .map(|(i, _)| i)
        .collect();
    let h = bad_h.is_empty();
    if !h {
        messages.push(format!(
            "(H) requires 0 <= R1_i <= 1; violated at {} state(s), first i = {}",
            bad_h.len(),
            bad_h[0]
        ));
    }

    AssumptionReport {
        a1_holds: a1,
        a1_inequality_chain: chain,
        a1_density_dependence: dd,
        a1_discriminant_positive: disc_ok,
        a2_holds: a2,
        h_holds: h,
        messages,
    }
}

fn equilibria_unchecked(params: &ModelParams) -> EquilibriumPair {
    let (a, b, c) = params.quadratic_coefficients();
    let disc = params.discriminant();
    let x_plus = (b + disc.sqrt()) / (2.0 * a);
    // Vieta: x- x+ = c/a, avoids cancellation in b - √Δ.
    let x_minus = c / (a * x_plus);
    EquilibriumPair {
        x_minus,
        x_plus,
        discriminant: disc,
        a,
        b,
        c,
    }
}

/// The two positive equilibria `x-* < x+*` of the density ODE. Requires (A1).
pub fn equilibria(params: &ModelParams) -> Result<EquilibriumPair> {
    let report = check_assumptions(params);
    if !report.a1_holds {
        return Err(AlleeError::AssumptionFailure(Box::new(report)));
    }
    Ok(equilibria_unchecked(params))
}

/// Fails unless (A1), (A2) and (H) all hold.
pub fn require_assumptions(params: &ModelParams) -> Result<AssumptionReport> {
    let report = check_assumptions(params);
    if report.all_hold() {
        Ok(report)
    } else {
        Err(AlleeError::AssumptionFailure(Box::new(report)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum R1Value {
    Constant(f64),
    PerState(Vec<f64>),
}

/// Flat key-value form of [`ModelParams`]. Unknown keys are ignored so the
/// same document can carry experiment options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub lambda: f64,
    pub mu: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub theta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub r1: R1Value,
}

impl TryFrom<ParamsConfig> for ModelParams {
    type Error = AlleeError;

    fn try_from(c: ParamsConfig) -> Result<Self> {
        let immigration = match c.r1 {
            R1Value::Constant(v) => ImmigrationSpec::constant(v, c.n)?,
            R1Value::PerState(v) => ImmigrationSpec::new(v)?,
        };
        ModelParams::new(
            c.lambda,
            c.mu,
            c.delta1,
            c.delta2,
            c.delta3,
            c.theta,
            c.n,
            immigration,
        )
    }
}

impl From<&ModelParams> for ParamsConfig {
    fn from(p: &ModelParams) -> Self {
        let r1 = match p.immigration.as_constant() {
            Some(v) => R1Value::Constant(v),
            None => R1Value::PerState(p.immigration.r1().to_vec()),
        };
        ParamsConfig {
            lambda: p.lambda,
            mu: p.mu,
            delta1: p.delta1,
            delta2: p.delta2,
            delta3: p.delta3,
            theta: p.theta,
            n: p.capacity_n,
            r1,
        }
    }
}

impl ModelParams {
    pub fn from_config_str(text: &str) -> Result<Self> {
        let cfg: ParamsConfig =
            toml::from_str(text).map_err(|e| AlleeError::Config(e.to_string()))?;
        cfg.try_into()
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(&ParamsConfig::from(self)).expect("flat config always serializes")
    }
}
