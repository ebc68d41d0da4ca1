//! Exact sample paths of the birth–death chain (Gillespie direct method)
//! and time-weighted occupation estimates of the stationary law.
//!
//! Every run draws from its own ChaCha8 stream seeded with the run's seed,
//! so an ensemble is reproducible regardless of how runs are scheduled.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::BirthDeathChain;
use crate::error::{AlleeError, Result};
use crate::model::{equilibria, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `times[0] = 0` is the start; `times[k]` is the `k`-th jump.
    pub times: Vec<f64>,
    /// State held from `times[k]` until the next jump.
    pub states: Vec<usize>,
    pub t_end: f64,
    pub seed: u64,
    /// The path reached a state with no outgoing transitions.
    pub absorbed: bool,
}

impl Trajectory {
    /// Columns `t,state`; a final row repeats the last state at `t_end`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,state\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(out, "{t},{s}").unwrap();
        }
        writeln!(out, "{},{}", self.t_end, self.states.last().unwrap()).unwrap();
        out
    }

    /// Holding intervals `(state, from, to)` in time order.
    fn intervals(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.states.len()).map(move |k| {
            let to = self.times.get(k + 1).copied().unwrap_or(self.t_end);
            (self.states[k], self.times[k], to)
        })
    }
}

/// Drives one path and reports each holding interval and each jump.
fn run_path<R: Rng>(
    chain: &BirthDeathChain,
    x0: usize,
    t_end: f64,
    rng: &mut R,
    mut on_interval: impl FnMut(usize, f64, f64),
    mut on_jump: impl FnMut(f64, usize),
) -> bool {
    let (b, d) = (chain.birth(), chain.death());
    let mut t = 0.0;
    let mut state = x0;
    loop {
        let up = b[state];
        let total = up + d[state];
        if total <= 0.0 {
            on_interval(state, t, t_end);
            return true;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        let next_t = t + hold;
        if next_t >= t_end {
            on_interval(state, t, t_end);
            return false;
        }
        on_interval(state, t, next_t);
        let u: f64 = rng.random();
        state = if u * total < up { state + 1 } else { state - 1 };
        t = next_t;
        on_jump(t, state);
    }
}

fn check_run(params: &ModelParams, x0: usize, t_end: f64) -> Result<()> {
    if x0 > params.capacity_n {
        return Err(AlleeError::StateOutOfRange {
            index: x0,
            capacity: params.capacity_n,
        });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(AlleeError::InvalidParameter(format!(
            "t_end = {t_end} must be finite and > 0"
        )));
    }
    Ok(())
}

pub fn simulate(params: &ModelParams, x0: usize, t_end: f64, seed: u64) -> Result<Trajectory> {
    check_run(params, x0, t_end)?;
    let chain = BirthDeathChain::from_params(params);
    Ok(simulate_chain(&chain, x0, t_end, seed))
}

pub fn simulate_chain(chain: &BirthDeathChain, x0: usize, t_end: f64, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = vec![0.0];
    let mut states = vec![x0];
    let absorbed = run_path(
        chain,
        x0,
        t_end,
        &mut rng,
        |_, _, _| {},
        |t, s| {
            times.push(t);
            states.push(s);
        },
    );
    Trajectory {
        times,
        states,
        t_end,
        seed,
        absorbed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationDistribution {
    pub frequencies: Vec<f64>,
    pub burn_in: f64,
    pub observed_time: f64,
}

struct OccupationAccumulator {
    time_in_state: Vec<f64>,
    burn_in: f64,
}

impl OccupationAccumulator {
    fn new(dim: usize, burn_in: f64) -> Self {
        Self {
            time_in_state: vec![0.0; dim],
            burn_in,
        }
    }

    fn add(&mut self, state: usize, from: f64, to: f64) {
        let from = from.max(self.burn_in);
        if to > from {
            self.time_in_state[state] += to - from;
        }
    }

    fn finish(self) -> OccupationDistribution {
        let observed_time: f64 = self.time_in_state.iter().sum();
        OccupationDistribution {
            frequencies: self
                .time_in_state
                .iter()
                .map(|t| t / observed_time)
                .collect(),
            burn_in: self.burn_in,
            observed_time,
        }
    }
}

fn check_window(burn_in: f64, t_end: f64) -> Result<()> {
    if !(burn_in >= 0.0) || burn_in >= t_end {
        return Err(AlleeError::EmptyWindow { burn_in, t_end });
    }
    Ok(())
}

/// Fraction of post-burn-in time spent in each state.
pub fn occupation_distribution(
    traj: &Trajectory,
    dim: usize,
    burn_in: f64,
) -> Result<OccupationDistribution> {
    check_window(burn_in, traj.t_end)?;
    let mut acc = OccupationAccumulator::new(dim, burn_in);
    for (s, from, to) in traj.intervals() {
        acc.add(s, from, to);
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub x0: usize,
    pub t_end: f64,
    pub burn_in: f64,
    pub base_seed: u64,
    /// Half-width of the extinction and persistence clusters, in density.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub seeds: Vec<u64>,
    pub mean_occupation: Vec<f64>,
    /// Per-state standard error of `mean_occupation` across runs.
    pub standard_error: Vec<f64>,
    /// Estimated `P[density <= ε]`.
    pub extinction_mass: f64,
    /// Estimated `P[|density - x+*| <= ε]`; absent without two equilibria.
    pub persistence_mass: Option<f64>,
    pub absorbed_runs: usize,
    pub config: EnsembleConfig,
}

impl EnsembleSummary {
    /// Scale of the Monte Carlo error of a total-variation distance computed
    /// from `mean_occupation`: `½ Σ_i SE_i`.
    pub fn tv_standard_error(&self) -> f64 {
        0.5 * self.standard_error.iter().sum::<f64>()
    }
}

fn occupation_run(
    chain: &BirthDeathChain,
    x0: usize,
    t_end: f64,
    burn_in: f64,
    seed: u64,
) -> (OccupationDistribution, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = OccupationAccumulator::new(chain.capacity() + 1, burn_in);
    let absorbed = run_path(
        chain,
        x0,
        t_end,
        &mut rng,
        |s, a, b| acc.add(s, a, b),
        |_, _| {},
    );
    (acc.finish(), absorbed)
}

/// Pools runs with seeds `base_seed, base_seed + 1, ...`. Runs execute in
/// parallel; aggregation follows run order.
pub fn ensemble(params: &ModelParams, config: EnsembleConfig) -> Result<EnsembleSummary> {
    if config.n_runs == 0 {
        return Err(AlleeError::InvalidParameter("n_runs must be >= 1".into()));
    }
    check_run(params, config.x0, config.t_end)?;
    check_window(config.burn_in, config.t_end)?;
    let chain = BirthDeathChain::from_params(params);
    let seeds: Vec<u64> = (0..config.n_runs as u64)
        .map(|r| config.base_seed.wrapping_add(r))
        .collect();
    let runs: Vec<(OccupationDistribution, bool)> = seeds
        .par_iter()
        .map(|&s| occupation_run(&chain, config.x0, config.t_end, config.burn_in, s))
        .collect();

    let dim = params.capacity_n + 1;
    let k = runs.len() as f64;
    let mut mean = vec![0.0; dim];
    for (occ, _) in &runs {
        for (m, f) in mean.iter_mut().zip(&occ.frequencies) {
            *m += f / k;
        }
    }
    let standard_error = if runs.len() > 1 {
        (0..dim)
            .map(|i| {
                let var = runs
                    .iter()
                    .map(|(o, _)| (o.frequencies[i] - mean[i]).powi(2))
                    .sum::<f64>()
                    / (k - 1.0);
                (var / k).sqrt()
            })
            .collect()
    } else {
        vec![f64::NAN; dim]
    };

    let n = params.capacity_n as f64;
    let extinction_mass = mean
        .iter()
        .enumerate()
        .filter(|(i, _)| *i as f64 / n <= config.epsilon)
        .map(|(_, p)| p)
        .sum();
    let persistence_mass = equilibria(params).ok().map(|e| {
        mean.iter()
            .enumerate()
            .filter(|(i, _)| (*i as f64 / n - e.x_plus).abs() <= config.epsilon)
            .map(|(_, p)| p)
            .sum()
    });

    Ok(EnsembleSummary {
        seeds,
        mean_occupation: mean,
        standard_error,
        extinction_mass,
        persistence_mass,
        absorbed_runs: runs.iter().filter(|(_, a)| *a).count(),
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ImmigrationSpec;
    use crate::stationary::{psd_product, total_variation};

    fn fig1b(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.7, 1.0, 0.9, 0.0, 1.7, 0.03, n, 0.99).unwrap()
    }

    #[test]
    fn absorbed_without_immigration() {
        let mut r1 = vec![0.99; 30];
        r1[0] = 0.0;
        let p = ModelParams::new(
            1.4,
            1.0,
            0.45,
            0.1,
            1.45,
            0.03,
            30,
            ImmigrationSpec::new(r1).unwrap(),
        )
        .unwrap();
        let tr = simulate(&p, 0, 100.0, 3).unwrap();
        assert!(tr.absorbed);
        assert_eq!(tr.states, vec![0]);
        let occ = occupation_distribution(&tr, 31, 0.0).unwrap();
        assert_eq!(occ.frequencies[0], 1.0);
    }

    #[test]
    fn same_seed_same_path() {
        let p = fig1b(50);
        let a = simulate(&p, 10, 50.0, 42).unwrap();
        let b = simulate(&p, 10, 50.0, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, 10, 50.0, 43).unwrap();
        assert_ne!(a.times, c.times);
    }

    #[test]
    fn path_invariants() {
        let tr = simulate(&fig1b(40), 20, 200.0, 9).unwrap();
        assert!(!tr.absorbed);
        for w in tr.states.windows(2) {
            assert_eq!(w[0].abs_diff(w[1]), 1);
        }
        for w in tr.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(*tr.times.last().unwrap() < tr.t_end);
        assert!(tr.states.iter().all(|&s| s <= 40));
    }

    #[test]
    fn constant_path_is_a_point_mass() {
        let tr = Trajectory {
            times: vec![0.0],
            states: vec![7],
            t_end: 10.0,
            seed: 0,
            absorbed: false,
        };
        let occ = occupation_distribution(&tr, 10, 2.0).unwrap();
        assert_eq!(occ.frequencies[7], 1.0);
        assert_eq!(occ.observed_time, 8.0);
        assert!(matches!(
            occupation_distribution(&tr, 10, 10.0),
            Err(AlleeError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn single_run_ensemble_equals_occupation() {
        let p = fig1b(30);
        let cfg = EnsembleConfig {
            n_runs: 1,
            x0: 5,
            t_end: 300.0,
            burn_in: 10.0,
            base_seed: 11,
            epsilon: 0.05,
        };
        let ens = ensemble(&p, cfg).unwrap();
        let tr = simulate(&p, 5, 300.0, 11).unwrap();
        let occ = occupation_distribution(&tr, 31, 10.0).unwrap();
        assert_eq!(ens.mean_occupation, occ.frequencies);
        assert_eq!(ens.seeds, vec![11]);
    }

    #[test]
    fn up_move_fraction_matches_jump_chain() {
        let p = fig1b(30);
        let chain = BirthDeathChain::from_params(&p);
        let tr = simulate(&p, 10, 5000.0, 5).unwrap();
        let mut visits = vec![0usize; 31];
        let mut ups = vec![0usize; 31];
        for w in tr.states.windows(2) {
            visits[w[0]] += 1;
            if w[1] > w[0] {
                ups[w[0]] += 1;
            }
        }
        for i in 0..=30 {
            if visits[i] < 500 {
                continue;
            }
            let q = chain.birth()[i] / (chain.birth()[i] + chain.death()[i]);
            let se = (q * (1.0 - q) / visits[i] as f64).sqrt();
            let obs = ups[i] as f64 / visits[i] as f64;
            assert!(
                (obs - q).abs() <= 4.0 * se + 1e-12,
                "state {i}: {obs} vs {q}"
            );
        }
    }

    #[test]
    fn occupation_error_shrinks_with_horizon() {
        let p = fig1b(50);
        let psd = psd_product(&p).unwrap();
        let tv = |t_end: f64| {
            let cfg = EnsembleConfig {
                n_runs: 8,
                x0: 0,
                t_end,
                burn_in: 0.0,
                base_seed: 100,
                epsilon: 0.05,
            };
            total_variation(&ensemble(&p, cfg).unwrap().mean_occupation, &psd.probs)
        };
        let short = tv(50.0);
        let long = tv(5000.0);
        assert!(long < short, "{long} !< {short}");
    }

    #[test]
    fn stationary_start_is_unbiased() {
        // Start each run at a state drawn from the stationary law through
        // the seed-indexed stream, then compare without burn-in.
        let p = fig1b(20);
        let psd = psd_product(&p).unwrap();
        let chain = BirthDeathChain::from_params(&p);
        let runs = 200;
        let mut mean = [0.0; 21];
        let mut per_run = Vec::new();
        for r in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + r);
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let x0 = psd
                .probs
                .iter()
                .position(|q| {
                    cum += q;
                    cum >= u
                })
                .unwrap_or(20);
            let (occ, _) = occupation_run(&chain, x0, 5.0, 0.0, r);
            for (m, f) in mean.iter_mut().zip(&occ.frequencies) {
                *m += f / runs as f64;
            }
            per_run.push(occ.frequencies);
        }
        for i in 0..=20 {
            let var = per_run
                .iter()
                .map(|f| (f[i] - mean[i]).powi(2))
                .sum::<f64>()
                / (runs as f64 - 1.0);
            let se = (var / runs as f64).sqrt();
            assert!(
                (mean[i] - psd.probs[i]).abs() <= 4.5 * se + 1e-3,
                "state {i}"
            );
        }
    }

    #[test]
    fn csv_export() {
        let tr = simulate(&fig1b(10), 3, 1.0, 1).unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,state\n0,3\n"));
        assert_eq!(csv.lines().count(), tr.states.len() + 2);
    }

    #[test]
    fn rejects_bad_runs() {
        let p = fig1b(10);
        assert!(simulate(&p, 11, 1.0, 0).is_err());
        assert!(simulate(&p, 1, 0.0, 0).is_err());
        let cfg = EnsembleConfig {
            n_runs: 0,
            x0: 1,
            t_end: 1.0,
            burn_in: 0.0,
            base_seed: 0,
            epsilon: 0.1,
        };
        assert!(ensemble(&p, cfg).is_err());
    }
}
