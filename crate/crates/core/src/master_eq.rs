//! Generator of the master equation `ṗ = Q p` and its forward evolution by
//! uniformization.

use std::fmt::Write as _;

use crate::chain::BirthDeathChain;
use crate::error::{AlleeError, Result};
use crate::model::ModelParams;
use crate::stationary::{product_distribution, total_variation, StationaryDistribution};

/// Tridiagonal `Q`: column `j` has `b(j)` below the diagonal, `d(j)` above it
/// and `-(b(j) + d(j))` on it, so every column sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    chain: BirthDeathChain,
    diagonal: Vec<f64>,
}

pub fn build_generator(params: &ModelParams) -> GeneratorMatrix {
    GeneratorMatrix::from_chain(BirthDeathChain::from_params(params))
}

impl GeneratorMatrix {
    pub fn from_chain(chain: BirthDeathChain) -> Self {
        let diagonal = chain
            .birth()
            .iter()
            .zip(chain.death())
            .map(|(b, d)| -(b + d))
            .collect();
        Self { chain, diagonal }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn chain(&self) -> &BirthDeathChain {
        &self.chain
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `Q[i+1][i] = b(i)`, length `N`.
    pub fn sub_diagonal(&self) -> &[f64] {
        let b = self.chain.birth();
        &b[..b.len() - 1]
    }

    /// `Q[i-1][i] = d(i)`, length `N`.
    pub fn super_diagonal(&self) -> &[f64] {
        &self.chain.death()[1..]
    }

    /// Dense entry `Q[row][col]`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diagonal[col]
        } else if row == col + 1 {
            self.chain.birth()[col]
        } else if col == row + 1 {
            self.chain.death()[col]
        } else {
            0.0
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let (b, d) = (self.chain.birth(), self.chain.death());
        (0..self.dim())
            .map(|j| self.diagonal[j] + b[j] + d[j])
            .collect()
    }

    /// `‖Q‖∞`, the largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(self.dim() - 1);
                (lo..=hi).map(|j| self.entry(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `out = Q p`.
    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.dim() - 1;
        let (b, d) = (self.chain.birth(), self.chain.death());
        for i in 0..=n {
            let mut v = self.diagonal[i] * p[i];
            if i > 0 {
                v += b[i - 1] * p[i - 1];
            }
            if i < n {
                v += d[i + 1] * p[i + 1];
            }
            out[i] = v;
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        self.apply_into(p, &mut out);
        out
    }

    /// Uniformization rate, `max_i (b(i) + d(i))` with a small margin.
    pub fn uniformization_rate(&self) -> f64 {
        let m = self.diagonal.iter().fold(0.0f64, |acc, v| acc.max(-v));
        m * (1.0 + 1e-9)
    }

    pub fn stationary(&self) -> Result<StationaryDistribution> {
        product_distribution(&self.chain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    pub entries: Vec<f64>,
    pub time: f64,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>, time: f64) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AlleeError::InvalidParameter(
                "probability entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AlleeError::InvalidParameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { entries, time })
    }

    pub fn point_mass(dim: usize, state: usize) -> Self {
        assert!(state < dim, "state {state} outside 0..{dim}");
        let mut entries = vec![0.0; dim];
        entries[state] = 1.0;
        Self { entries, time: 0.0 }
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            entries: vec![1.0 / dim as f64; dim],
            time: 0.0,
        }
    }

    pub fn from_stationary(dist: &StationaryDistribution) -> Self {
        Self {
            entries: dist.probs.clone(),
            time: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Total-variation budget for the truncated Poisson series.
    pub tolerance: f64,
    /// Largest `Λ Δt` handled by one series; longer horizons are split.
    pub max_rate_time: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_rate_time: 64.0,
        }
    }
}

pub fn evolve(gen: &GeneratorMatrix, p0: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
    evolve_with(gen, p0, t, EvolveOptions::default())
}

/// `exp(Q t) p0` as `Σ_k Poisson(k; Λt) P^k p0` with `P = I + Q/Λ`.
/// `P` is stochastic, so every partial sum stays non-negative; the dropped
/// tail mass is bounded by `tolerance` before the final renormalization.
pub fn evolve_with(
    gen: &GeneratorMatrix,
    p0: &ProbabilityVector,
    t: f64,
    options: EvolveOptions,
) -> Result<ProbabilityVector> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(AlleeError::InvalidParameter(format!(
            "evolution time {t} must be finite and >= 0"
        )));
    }
    if p0.entries.len() != gen.dim() {
        return Err(AlleeError::InvalidParameter(format!(
            "initial vector has {} entries, generator has dimension {}",
            p0.entries.len(),
            gen.dim()
        )));
    }
    let rate = gen.uniformization_rate();
    if t == 0.0 || rate == 0.0 {
        return Ok(ProbabilityVector {
            entries: p0.entries.clone(),
            time: p0.time + t,
        });
    }

    let steps = (rate * t / options.max_rate_time).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let step_tol = options.tolerance / steps as f64;
    let mut p = p0.entries.clone();
    let mut scratch = Workspace::new(gen.dim());
    for _ in 0..steps {
        poisson_step(gen, rate, rate * dt, step_tol, &mut p, &mut scratch)?;
    }
    for v in &mut p {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(ProbabilityVector {
        entries: p,
        time: p0.time + t,
    })
}

struct Workspace {
    term: Vec<f64>,
    qv: Vec<f64>,
    acc: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            term: vec![0.0; dim],
            qv: vec![0.0; dim],
            acc: vec![0.0; dim],
        }
    }
}

fn poisson_step(
    gen: &GeneratorMatrix,
    rate: f64,
    mean: f64,
    tol: f64,
    p: &mut [f64],
    ws: &mut Workspace,
) -> Result<()> {
    // mean <= max_rate_time keeps exp(-mean) well above underflow.
    let max_terms = (mean + 20.0 * mean.sqrt() + 200.0) as usize;
    let mut weight = (-mean).exp();
    ws.term.copy_from_slice(p);
    for (a, v) in ws.acc.iter_mut().zip(&ws.term) {
        *a = weight * v;
    }
    let mut k = 0usize;
    loop {
        // Poisson weights decay geometrically with ratio mean/(k+2) past the
        // mode, which bounds the dropped tail.
        let ratio = mean / (k as f64 + 2.0);
        let next = weight * mean / (k as f64 + 1.0);
        if (k as f64) >= mean && ratio < 1.0 && next / (1.0 - ratio) <= tol {
            break;
        }
        if k >= max_terms {
            return Err(AlleeError::ToleranceUnachievable {
                tolerance: tol,
                terms: k,
            });
        }
        gen.apply_into(&ws.term, &mut ws.qv);
        for (t, q) in ws.term.iter_mut().zip(&ws.qv) {
            *t += q / rate;
        }
        k += 1;
        weight = next;
        for (a, v) in ws.acc.iter_mut().zip(&ws.term) {
            *a += weight * v;
        }
    }
    p.copy_from_slice(&ws.acc);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceWitness {
    pub final_state: ProbabilityVector,
    /// Model time elapsed since `p0`.
    pub horizon: f64,
    pub distance: f64,
    /// `(elapsed time, TV distance to the stationary law)` per checkpoint.
    pub history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergeOptions {
    pub initial_horizon: f64,
    pub max_horizon: f64,
    pub evolve: EvolveOptions,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self {
            initial_horizon: 1.0,
            max_horizon: 1e6,
            evolve: EvolveOptions {
                tolerance: 1e-13,
                ..EvolveOptions::default()
            },
        }
    }
}

pub fn converge_to_stationary(
    gen: &GeneratorMatrix,
    p0: &ProbabilityVector,
    tol: f64,
) -> Result<ConvergenceWitness> {
    converge_to_stationary_with(gen, p0, tol, ConvergeOptions::default())
}

/// Evolves over doubling horizons `T, 2T, 4T, ...` until the total-variation
/// distance to the product-formula law is at most `tol`.
pub fn converge_to_stationary_with(
    gen: &GeneratorMatrix,
    p0: &ProbabilityVector,
    tol: f64,
    options: ConvergeOptions,
) -> Result<ConvergenceWitness> {
    let target = gen.stationary()?;
    let mut state = p0.clone();
    let mut elapsed = 0.0;
    let mut distance = total_variation(&state.entries, &target.probs);
    let mut history = vec![(0.0, distance)];
    let mut step = options.initial_horizon;
    while distance > tol {
        if elapsed >= options.max_horizon {
            return Err(AlleeError::BudgetExceeded {
                achieved: distance,
                horizon: elapsed,
                tolerance: tol,
            });
        }
        state = evolve_with(gen, &state, step, options.evolve)?;
        elapsed += step;
        distance = total_variation(&state.entries, &target.probs);
        history.push((elapsed, distance));
        // Next checkpoint at twice the elapsed time.
        step = elapsed;
    }
    Ok(ConvergenceWitness {
        final_state: state,
        horizon: elapsed,
        distance,
        history,
    })
}

/// Long-format snapshots, columns `t,state,prob`.
pub fn snapshots_to_csv(snapshots: &[ProbabilityVector]) -> String {
    let mut out = String::from("t,state,prob\n");
    for s in snapshots {
        for (i, p) in s.entries.iter().enumerate() {
            writeln!(out, "{},{i},{p}", s.time).unwrap();
        }
    }
    out
}

/// Evolves `p0` through increasing checkpoint times, returning one snapshot
/// per checkpoint.
pub fn evolve_checkpoints(
    gen: &GeneratorMatrix,
    p0: &ProbabilityVector,
    checkpoints: &[f64],
) -> Result<Vec<ProbabilityVector>> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut current = p0.clone();
    for &t in checkpoints {
        if t < current.time {
            return Err(AlleeError::InvalidParameter(
                "checkpoints must be non-decreasing".into(),
            ));
        }
        current = evolve(gen, &current, t - current.time)?;
        out.push(current.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::psd_product;

    fn fig1a(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.4, 1.0, 0.45, 0.1, 1.45, 0.03, n, 0.99).unwrap()
    }

    #[test]
    fn columns_sum_to_zero() {
        let g = build_generator(&fig1a(100));
        for s in g.column_sums() {
            assert!(s.abs() <= 1e-13);
        }
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                if i != j {
                    assert!(g.entry(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn synthetic_generator_entries() {
        let c = BirthDeathChain::from_rates(vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 4.0]).unwrap();
        let g = GeneratorMatrix::from_chain(c);
        let dense: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| g.entry(i, j)).collect())
            .collect();
        assert_eq!(
            dense,
            vec![
                vec![-1.0, 1.0, 0.0],
                vec![1.0, -3.0, 4.0],
                vec![0.0, 2.0, -4.0]
            ]
        );
        let r = g.apply(&[0.4, 0.4, 0.2]);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn stationary_is_in_the_kernel() {
        let p = fig1a(100);
        let g = build_generator(&p);
        let d = psd_product(&p).unwrap();
        let r = g.apply(&d.probs);
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(res <= 1e-10 * g.inf_norm(), "{res}");
    }

    #[test]
    fn zero_time_is_identity() {
        let g = build_generator(&fig1a(20));
        let p0 = ProbabilityVector::point_mass(21, 10);
        assert_eq!(evolve(&g, &p0, 0.0).unwrap().entries, p0.entries);
    }

    #[test]
    fn stationary_start_stays_put() {
        let p = fig1a(20);
        let g = build_generator(&p);
        let d = psd_product(&p).unwrap();
        let p0 = ProbabilityVector::from_stationary(&d);
        for t in [0.3, 7.0, 150.0] {
            let pt = evolve(&g, &p0, t).unwrap();
            assert!(total_variation(&pt.entries, &d.probs) < 1e-10);
        }
    }

    #[test]
    fn long_time_limit_matches_product_formula() {
        let p = fig1a(20);
        let g = build_generator(&p);
        let d = psd_product(&p).unwrap();
        let pt = evolve(&g, &ProbabilityVector::point_mass(21, 10), 2000.0).unwrap();
        assert!(total_variation(&pt.entries, &d.probs) < 1e-8);
        assert!((pt.time - 2000.0).abs() < 1e-12);
    }

    #[test]
    fn converges_from_vacuous_tolerance_immediately() {
        let g = build_generator(&fig1a(20));
        let w = converge_to_stationary(&g, &ProbabilityVector::point_mass(21, 0), 1.0).unwrap();
        assert_eq!(w.horizon, 0.0);
        assert_eq!(w.history.len(), 1);
    }

    #[test]
    fn budget_exhaustion_reports_distance() {
        let g = build_generator(&fig1a(20));
        let opts = ConvergeOptions {
            max_horizon: 2.0,
            ..ConvergeOptions::default()
        };
        match converge_to_stationary_with(&g, &ProbabilityVector::point_mass(21, 20), 1e-14, opts) {
            Err(AlleeError::BudgetExceeded {
                achieved, horizon, ..
            }) => {
                assert!(achieved > 1e-14);
                assert!(horizon >= 2.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = build_generator(&fig1a(20));
        let p0 = ProbabilityVector::uniform(21);
        assert!(evolve(&g, &p0, -1.0).is_err());
        assert!(evolve(&g, &ProbabilityVector::uniform(5), 1.0).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.6], 0.0).is_err());
        assert!(ProbabilityVector::new(vec![-0.5, 1.5], 0.0).is_err());
    }

    #[test]
    fn checkpoints_export() {
        let g = build_generator(&fig1a(4));
        let snaps =
            evolve_checkpoints(&g, &ProbabilityVector::point_mass(5, 0), &[0.0, 1.0, 2.0]).unwrap();
        let csv = snapshots_to_csv(&snaps);
        assert_eq!(csv.lines().count(), 1 + 3 * 5);
        assert!(csv.starts_with("t,state,prob\n0,0,1\n"));
    }
}
