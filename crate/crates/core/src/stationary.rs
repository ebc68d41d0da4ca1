//! Exact positive stationary distribution and its mode structure.
//!
//! The chain is a birth–death process, so the stationary law satisfies
//! detailed balance `b(i) p_i = d(i+1) p_{i+1}` and is a running product of
//! successive ratios. Weights are accumulated as logarithms and normalized
//! with log-sum-exp; plain products over- or underflow once `N` reaches the
//! low thousands.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::BirthDeathChain;
use crate::error::{AlleeError, Result};
use crate::logspace::normalize_log_weights;
use crate::model::{birth_rate_unchecked, death_rate_unchecked, equilibria, ModelParams};

/// Largest state count accepted by the dense null-space solve.
pub const NULLSPACE_MAX_N: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    /// `log(p_i / p_0)`
    pub log_weights: Vec<f64>,
    pub capacity_n: usize,
}

impl StationaryDistribution {
    pub fn from_log_weights(log_weights: Vec<f64>) -> Self {
        let probs = normalize_log_weights(&log_weights);
        let capacity_n = log_weights.len() - 1;
        Self {
            probs,
            log_weights,
            capacity_n,
        }
    }

    /// Builds a distribution from probabilities, e.g. from a linear solve.
    /// Log-weights are taken relative to state 0.
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let p0 = probs[0];
        let log_weights = probs.iter().map(|p| (p / p0).ln()).collect();
        let capacity_n = probs.len() - 1;
        Self {
            probs,
            log_weights,
            capacity_n,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn density(&self, i: usize) -> f64 {
        i as f64 / self.capacity_n as f64
    }

    /// Columns `state,density,prob,log_weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,density,prob,log_weight\n");
        for (i, (p, lw)) in self.probs.iter().zip(&self.log_weights).enumerate() {
            writeln!(out, "{i},{},{p},{lw}", self.density(i)).unwrap();
        }
        out
    }
}

/// Product-formula stationary distribution of the model chain.
pub fn psd_product(params: &ModelParams) -> Result<StationaryDistribution> {
    if params.r1_at(0) <= 0.0 {
        return Err(AlleeError::DegenerateDistribution);
    }
    product_distribution(&BirthDeathChain::from_params(params))
}

pub fn product_distribution(chain: &BirthDeathChain) -> Result<StationaryDistribution> {
    Ok(StationaryDistribution::from_log_weights(
        chain.log_weights()?,
    ))
}

/// Stationary distribution from a dense solve of `Q p = 0`, `Σ p = 1`.
/// Independent of the product formula; used to cross-check it.
pub fn psd_nullspace_oracle(params: &ModelParams) -> Result<StationaryDistribution> {
    if params.r1_at(0) <= 0.0 {
        return Err(AlleeError::DegenerateDistribution);
    }
    nullspace_distribution(&BirthDeathChain::from_params(params))
}

pub fn nullspace_distribution(chain: &BirthDeathChain) -> Result<StationaryDistribution> {
    let n = chain.capacity();
    if n > NULLSPACE_MAX_N {
        return Err(AlleeError::InvalidParameter(format!(
            "dense null-space solve limited to N <= {NULLSPACE_MAX_N}, got {n}"
        )));
    }
    let dim = n + 1;
    let (b, d) = (chain.birth(), chain.death());
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        q[(j, j)] = -(b[j] + d[j]);
        if j < n {
            q[(j + 1, j)] = b[j];
        }
        if j > 0 {
            q[(j - 1, j)] = d[j];
        }
    }
    // One balance equation is redundant; swap it for normalization.
    let mut system = q.clone();
    for j in 0..dim {
        system[(n, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(dim);
    rhs[n] = 1.0;
    let p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| AlleeError::SingularSystem("bordered generator is singular".into()))?;

    let residual = (&q * &p).amax();
    if !residual.is_finite() || residual > 1e-10 {
        return Err(AlleeError::SingularSystem(format!(
            "residual ‖Qp‖∞ = {residual:e} exceeds 1e-10"
        )));
    }
    let probs: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    Ok(StationaryDistribution::from_probs(
        probs.into_iter().map(|v| v / total).collect(),
    ))
}

/// `p_{i+1} / p_i = b(i) / d(i+1)`.
pub fn successive_ratio(params: &ModelParams, i: usize) -> Result<f64> {
    if i >= params.capacity_n {
        return Err(AlleeError::StateOutOfRange {
            index: i,
            capacity: params.capacity_n - 1,
        });
    }
    Ok(birth_rate_unchecked(params, i) / death_rate_unchecked(params, i + 1))
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(
        p.len(),
        q.len(),
        "distributions over different state spaces"
    );
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeOptions {
    /// A candidate extremum must dominate this many states on each side.
    pub window: usize,
    /// Relative depth the interior minimum must have below both maxima.
    pub margin: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            window: 5,
            margin: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    /// Global argmax, smallest index on ties.
    pub major_mode: usize,
    /// Largest local maximum at a state `>= 1`.
    pub i_plus: Option<usize>,
    /// Minimizer over `0..=i_plus`.
    pub i_minus: Option<usize>,
    /// Argmax over `0..=i_minus`, the extinction-side peak.
    pub extinction_mode: Option<usize>,
    pub bimodal: bool,
    pub segments: Vec<Segment>,
    pub options: ModeOptions,
}

impl ModeProfile {
    /// The peak of a bimodal profile that is not the global maximum.
    pub fn minor_mode(&self) -> Option<usize> {
        if !self.bimodal {
            return None;
        }
        let (left, right) = (self.extinction_mode?, self.i_plus?);
        Some(if self.major_mode == right {
            left
        } else {
            right
        })
    }
}

fn argmax_in(lw: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if lw[i] > lw[best] {
            best = i;
        }
    }
    best
}

fn argmin_in(lw: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if lw[i] < lw[best] {
            best = i;
        }
    }
    best
}

pub fn mode_profile(dist: &StationaryDistribution) -> ModeProfile {
    mode_profile_with(dist, ModeOptions::default())
}

/// Locates the extinction-side peak, the interior minimum `i_minus` and the
/// persistence peak `i_plus`. Works on log-weights so it stays exact when
/// probabilities underflow. Equal neighbours count as a decrease, which puts
/// a plateau's peak at its smallest index.
pub fn mode_profile_with(dist: &StationaryDistribution, options: ModeOptions) -> ModeProfile {
    let lw = &dist.log_weights;
    let n = lw.len() - 1;
    let up: Vec<bool> = (0..n).map(|i| lw[i + 1] > lw[i]).collect();

    let mut segments: Vec<Segment> = Vec::new();
    for (i, &rising) in up.iter().enumerate() {
        let direction = if rising {
            Direction::Increasing
        } else {
            Direction::Decreasing
        };
        match segments.last_mut() {
            Some(s) if s.direction == direction => s.end = i + 1,
            _ => segments.push(Segment {
                start: i,
                end: i + 1,
                direction,
            }),
        }
    }

    let major_mode = argmax_in(lw, 0, n);
    let m = options.window;
    let is_local_max = |i: usize| (i == 0 || up[i - 1]) && (i == n || !up[i]);
    let dominates_window = |i: usize| {
        let lo = i.saturating_sub(m);
        let hi = (i + m).min(n);
        (lo..=hi).all(|j| lw[j] <= lw[i])
    };

    let i_plus = (1..=n)
        .filter(|&i| is_local_max(i) && dominates_window(i))
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if lw[b] >= lw[i] => Some(b),
            _ => Some(i),
        });

    let (i_minus, extinction_mode, bimodal) = match i_plus {
        Some(ip) => {
            let im = argmin_in(lw, 0, ip);
            if im == 0 {
                (Some(0), None, false)
            } else {
                let left = argmax_in(lw, 0, im);
                let depth = (1.0 - options.margin).ln();
                let bimodal =
                    left < im && im < ip && lw[im] < lw[left] + depth && lw[im] < lw[ip] + depth;
                (Some(im), bimodal.then_some(left), bimodal)
            }
        }
        None => (None, None, false),
    };

    ModeProfile {
        major_mode,
        i_plus,
        i_minus,
        extinction_mode,
        bimodal,
        segments,
        options,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub i_plus: usize,
    /// `i_plus / N`
    pub density: f64,
    /// `|i_plus / N - x+*| · N`
    pub scaled_offset: f64,
}

/// Tracks `i_plus / N` against `x+*` across capacities.
pub fn mode_scaling_check(params: &ModelParams, n_list: &[usize]) -> Result<Vec<ScalingRow>> {
    let x_plus = equilibria(params)?.x_plus;
    n_list
        .par_iter()
        .map(|&n| {
            let p = params.with_capacity(n)?;
            let profile = mode_profile(&psd_product(&p)?);
            let i_plus = profile.i_plus.ok_or(AlleeError::NoPersistenceMode)?;
            let density = i_plus as f64 / n as f64;
            Ok(ScalingRow {
                n,
                i_plus,
                density,
                scaled_offset: (density - x_plus).abs() * n as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> BirthDeathChain {
        BirthDeathChain::from_rates(vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 4.0]).unwrap()
    }

    fn fig1a(n: usize) -> ModelParams {
        ModelParams::with_constant_immigration(1.4, 1.0, 0.45, 0.1, 1.45, 0.03, n, 0.99).unwrap()
    }

    #[test]
    fn synthetic_three_state_chain() {
        let d = product_distribution(&synthetic()).unwrap();
        let w: Vec<f64> = d.log_weights.iter().map(|v| v.exp()).collect();
        for (a, b) in w.iter().zip([1.0, 1.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in d.probs.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        let o = nullspace_distribution(&synthetic()).unwrap();
        for (a, b) in o.probs.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_two_state_chain() {
        let c = BirthDeathChain::from_rates(vec![3.0, 0.0], vec![0.0, 3.0]).unwrap();
        let o = nullspace_distribution(&c).unwrap();
        assert!((o.probs[0] - 0.5).abs() < 1e-15 && (o.probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_without_immigration_at_zero() {
        let mut r1 = vec![0.5; 20];
        r1[0] = 0.0;
        let p = ModelParams::new(
            1.4,
            1.0,
            0.45,
            0.1,
            1.45,
            0.03,
            20,
            crate::model::ImmigrationSpec::new(r1).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            psd_product(&p),
            Err(AlleeError::DegenerateDistribution)
        ));
        assert!(matches!(
            psd_nullspace_oracle(&p),
            Err(AlleeError::DegenerateDistribution)
        ));
    }

    #[test]
    fn oracle_agrees_at_n20() {
        let p = fig1a(20);
        let a = psd_product(&p).unwrap();
        let b = psd_nullspace_oracle(&p).unwrap();
        assert!(total_variation(&a.probs, &b.probs) < 1e-10);
    }

    #[test]
    fn oracle_refuses_large_n() {
        assert!(psd_nullspace_oracle(&fig1a(NULLSPACE_MAX_N + 1)).is_err());
    }

    #[test]
    fn successive_ratio_matches_weights() {
        let p = fig1a(100);
        let d = psd_product(&p).unwrap();
        for i in 0..100 {
            let r = successive_ratio(&p, i).unwrap();
            let from_w = (d.log_weights[i + 1] - d.log_weights[i]).exp();
            assert!((r - from_w).abs() <= 1e-12 * r);
        }
        assert!(successive_ratio(&p, 100).is_err());
        // Just past the persistence peak the chain drifts down.
        for i in 40..45 {
            assert!(successive_ratio(&p, i).unwrap() < 1.0);
        }
    }

    #[test]
    fn strictly_decreasing_profile_is_unimodal() {
        let lw: Vec<f64> = (0..30).map(|i| -(i as f64)).collect();
        let prof = mode_profile(&StationaryDistribution::from_log_weights(lw));
        assert_eq!(prof.major_mode, 0);
        assert_eq!(prof.i_plus, None);
        assert!(!prof.bimodal);
        assert_eq!(prof.segments.len(), 1);
        assert_eq!(prof.segments[0].direction, Direction::Decreasing);
    }

    #[test]
    fn ties_resolve_to_smaller_index() {
        let lw = vec![0.0, 1.0, 2.0, 2.0, 1.0, 0.0];
        let prof = mode_profile(&StationaryDistribution::from_log_weights(lw));
        assert_eq!(prof.major_mode, 2);
        assert_eq!(prof.i_plus, Some(2));
    }

    #[test]
    fn bimodal_segments_follow_down_up_down() {
        let prof = mode_profile(&psd_product(&fig1a(100)).unwrap());
        assert!(prof.bimodal);
        let dirs: Vec<Direction> = prof.segments.iter().map(|s| s.direction).collect();
        assert_eq!(
            dirs,
            vec![
                Direction::Decreasing,
                Direction::Increasing,
                Direction::Decreasing
            ]
        );
        let im = prof.i_minus.unwrap();
        let ip = prof.i_plus.unwrap();
        assert!(im < ip);
        assert_eq!(prof.major_mode, 0);
        assert_eq!(prof.minor_mode(), Some(ip));
    }

    #[test]
    fn csv_layout() {
        let d = product_distribution(&synthetic()).unwrap();
        let csv = d.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("state,density,prob,log_weight"));
        assert_eq!(lines.count(), 3);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn rates() -> impl Strategy<Value = BirthDeathChain> {
            (2usize..40).prop_flat_map(|n| {
                (
                    prop::collection::vec(0.05f64..20.0, n),
                    prop::collection::vec(0.05f64..20.0, n),
                )
                    .prop_map(|(mut b, d)| {
                        b.push(0.0);
                        let mut death = vec![0.0];
                        death.extend(d);
                        BirthDeathChain::from_rates(b, death).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn product_matches_oracle_and_balances_flux(chain in rates()) {
                let a = product_distribution(&chain).unwrap();
                let o = nullspace_distribution(&chain).unwrap();
                prop_assert!(total_variation(&a.probs, &o.probs) < 1e-10);
                let (b, d) = (chain.birth(), chain.death());
                for i in 0..chain.capacity() {
                    let lhs = b[i] * a.probs[i];
                    let rhs = d[i + 1] * a.probs[i + 1];
                    prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs));
                }
            }
        }
    }
}
