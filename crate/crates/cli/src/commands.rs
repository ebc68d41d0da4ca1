use std::fmt::Write as _;

use allee_core::asymptotics::{
    limit_distribution_diagnostic, markov_exponent_with, ConvergenceDiagnostic, ThresholdReport,
};
use allee_core::deterministic::{basin_sweep, immigration_equilibria, integrate, Terminal};
use allee_core::master_eq::{
    build_generator, evolve_with, snapshots_to_csv, EvolveOptions, ProbabilityVector,
};
use allee_core::model::{equilibria, require_assumptions, AssumptionReport};
use allee_core::quadrature::QuadratureOptions;
use allee_core::ssa::{ensemble, simulate, EnsembleConfig, EnsembleSummary};
use allee_core::stationary::{
    mode_profile_with, psd_product, total_variation, ModeOptions, ModeProfile,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::OutputDir;

fn mode_options(cfg: &ExperimentConfig) -> ModeOptions {
    ModeOptions {
        window: cfg.options.mode_window,
        margin: cfg.options.mode_margin,
    }
}

#[derive(Serialize)]
struct ModeSummary<'a> {
    capacity_n: usize,
    major_mode: usize,
    minor_mode: Option<usize>,
    /// `p[minor] / p[major]`.
    minor_to_major_ratio: Option<f64>,
    profile: &'a ModeProfile,
}

pub fn psd(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    require_assumptions(&cfg.params)?;
    let dist = psd_product(&cfg.params)?;
    let profile = mode_profile_with(&dist, mode_options(cfg));
    let minor = profile.minor_mode();
    out.write("psd.csv", &dist.to_csv())?;
    out.write_json(
        "modes.json",
        &ModeSummary {
            capacity_n: dist.capacity_n,
            major_mode: profile.major_mode,
            minor_mode: minor,
            minor_to_major_ratio: minor.map(|m| dist.probs[m] / dist.probs[profile.major_mode]),
            profile: &profile,
        },
    )
}

#[derive(Serialize)]
struct ThresholdOutput<'a> {
    report: &'a ThresholdReport,
    assumptions: &'a AssumptionReport,
    regime: allee_core::asymptotics::Classification,
    epsilon: f64,
    warning: &'a Option<String>,
}

pub fn threshold(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let o = &cfg.options;
    let assumptions = require_assumptions(&cfg.params)?;
    let report = markov_exponent_with(
        &cfg.params,
        o.critical_tolerance,
        QuadratureOptions::default(),
    )?;
    let diag: ConvergenceDiagnostic =
        limit_distribution_diagnostic(&cfg.params, &o.n_list, o.epsilon)?;
    out.write_json(
        "threshold.json",
        &ThresholdOutput {
            report: &report,
            assumptions: &assumptions,
            regime: diag.regime,
            epsilon: diag.epsilon,
            warning: &diag.warning,
        },
    )?;
    out.write("diagnostic.csv", &diag.to_csv())
}

#[derive(Serialize)]
struct EvolveRow {
    t: f64,
    tv_to_stationary: f64,
}

pub fn evolve(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let o = &cfg.options;
    let generator = build_generator(&cfg.params);
    let target = psd_product(&cfg.params)?;
    let opts = EvolveOptions {
        tolerance: o.evolve_tolerance,
        ..EvolveOptions::default()
    };
    let mut current = ProbabilityVector::point_mass(generator.dim(), o.x0);
    let mut snapshots = Vec::with_capacity(o.checkpoints);
    let last = (o.checkpoints - 1) as f64;
    for k in 0..o.checkpoints {
        let t = o.t_end * k as f64 / last;
        current = evolve_with(&generator, &current, t - current.time, opts)?;
        current.time = t;
        snapshots.push(current.clone());
    }
    let rows: Vec<EvolveRow> = snapshots
        .iter()
        .map(|s| EvolveRow {
            t: s.time,
            tv_to_stationary: total_variation(&s.entries, &target.probs),
        })
        .collect();
    out.write("evolve.csv", &snapshots_to_csv(&snapshots))?;
    out.write_json("evolve.json", &rows)
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    tv_to_stationary: f64,
    tv_standard_error: f64,
    summary: &'a EnsembleSummary,
}

pub fn simulate_cmd(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let o = &cfg.options;
    let traj = simulate(&cfg.params, o.x0, o.t_end, o.seed)?;
    out.write("trajectory.csv", &traj.to_csv())?;
    let summary = ensemble(
        &cfg.params,
        EnsembleConfig {
            n_runs: o.runs,
            x0: o.x0,
            t_end: o.t_end,
            burn_in: o.burn_in,
            base_seed: o.seed,
            epsilon: o.epsilon,
        },
    )?;
    let target = psd_product(&cfg.params)?;
    let mut csv = String::from("state,occupation,standard_error,stationary\n");
    for (i, ((m, se), p)) in summary
        .mean_occupation
        .iter()
        .zip(&summary.standard_error)
        .zip(&target.probs)
        .enumerate()
    {
        writeln!(csv, "{i},{m},{se},{p}").unwrap();
    }
    out.write("occupation.csv", &csv)?;
    out.write_json(
        "ensemble.json",
        &SimulateOutput {
            tv_to_stationary: total_variation(&summary.mean_occupation, &target.probs),
            tv_standard_error: summary.tv_standard_error(),
            summary: &summary,
        },
    )
}

#[derive(Serialize)]
struct OdeOutput {
    x_minus: Option<f64>,
    x_plus: Option<f64>,
    /// Largest grid start that went extinct and smallest that reached `x+*`.
    basin_boundary: (Option<f64>, Option<f64>),
    immigration: allee_core::deterministic::ImmigrationEquilibria,
}

fn terminal_name(t: Terminal) -> &'static str {
    match t {
        Terminal::Extinction => "extinction",
        Terminal::CarryingCapacity => "carrying_capacity",
        Terminal::Undecided => "undecided",
    }
}

pub fn ode(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let o = &cfg.options;
    let traj = integrate(&cfg.params, o.ode_x0, o.ode_t_end)?;
    out.write("ode.csv", &traj.to_csv())?;

    let last = (o.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..o.grid_points).map(|k| k as f64 / last).collect();
    let terminals = basin_sweep(&cfg.params, &grid, o.ode_t_end)?;
    let mut csv = String::from("x0,terminal\n");
    for (x, t) in grid.iter().zip(&terminals) {
        writeln!(csv, "{x},{}", terminal_name(*t)).unwrap();
    }
    out.write("basins.csv", &csv)?;

    let pair = equilibria(&cfg.params).ok();
    let lower = grid
        .iter()
        .zip(&terminals)
        .filter(|(_, t)| **t == Terminal::Extinction)
        .map(|(x, _)| *x)
        .reduce(f64::max);
    let upper = grid
        .iter()
        .zip(&terminals)
        .filter(|(_, t)| **t == Terminal::CarryingCapacity)
        .map(|(x, _)| *x)
        .reduce(f64::min);
    let alpha = o.alpha.expect("resolved config carries alpha");
    out.write_json(
        "equilibria.json",
        &OdeOutput {
            x_minus: pair.as_ref().map(|p| p.x_minus),
            x_plus: pair.as_ref().map(|p| p.x_plus),
            basin_boundary: (lower, upper),
            immigration: immigration_equilibria(&cfg.params, alpha)?,
        },
    )
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let o = &cfg.options;
    require_assumptions(&cfg.params)?;
    let x_plus = equilibria(&cfg.params)?.x_plus;
    let diag = limit_distribution_diagnostic(&cfg.params, &o.n_list, o.epsilon)?;
    let mut csv = String::from(
        "N,major_mode,minor_mode,bimodal,i_plus,i_minus,i_plus_density,scaled_offset,minor_to_major_ratio,discrete_exponent,tail_mass\n",
    );
    for (&n, row) in o.n_list.iter().zip(&diag.rows) {
        let p = cfg.params.with_capacity(n)?;
        let dist = psd_product(&p)?;
        let prof = mode_profile_with(&dist, mode_options(cfg));
        let minor = prof.minor_mode();
        let density = prof.i_plus.map(|i| i as f64 / n as f64);
        writeln!(
            csv,
            "{n},{},{},{},{},{},{},{},{},{},{}",
            prof.major_mode,
            opt(minor),
            prof.bimodal,
            opt(prof.i_plus),
            opt(prof.i_minus),
            opt(density),
            opt(density.map(|d| (d - x_plus).abs() * n as f64)),
            opt(minor.map(|m| dist.probs[m] / dist.probs[prof.major_mode])),
            row.discrete_exponent,
            row.tail_mass,
        )
        .unwrap();
    }
    out.write("sweep.csv", &csv)
}
