//! Experiment configuration: model parameters plus run options in one flat
//! TOML document.

use std::collections::BTreeSet;

use allee_core::model::{ModelParams, ParamsConfig};
use allee_core::presets::preset_source;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const PARAM_KEYS: [&str; 8] = [
    "lambda", "mu", "delta1", "delta2", "delta3", "theta", "N", "r1",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Base seed; ensemble run `r` uses `seed + r`.
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub epsilon: f64,
    pub critical_tolerance: f64,
    pub mode_window: usize,
    pub mode_margin: f64,
    /// Initial state for `evolve` and `simulate`.
    pub x0: usize,
    pub t_end: f64,
    pub checkpoints: usize,
    pub evolve_tolerance: f64,
    pub runs: usize,
    pub burn_in: f64,
    pub ode_x0: f64,
    pub ode_t_end: f64,
    pub grid_points: usize,
    /// Immigration rate for the equilibrium report; defaults to `μ R1_0 / N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            n_list: vec![500, 1000, 2000, 5000],
            epsilon: 0.05,
            critical_tolerance: 1e-7,
            mode_window: 5,
            mode_margin: 1e-12,
            x0: 0,
            t_end: 100.0,
            checkpoints: 11,
            evolve_tolerance: 1e-12,
            runs: 1,
            burn_in: 0.0,
            ode_x0: 0.5,
            ode_t_end: 1000.0,
            grid_points: 101,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub options: RunOptions,
}

fn option_keys() -> BTreeSet<String> {
    let t = toml::Table::try_from(RunOptions {
        alpha: Some(0.0),
        ..RunOptions::default()
    })
    .expect("options serialize to a table");
    t.keys().cloned().collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let known = option_keys();
        let unknown: Vec<&String> = table
            .keys()
            .filter(|k| !PARAM_KEYS.contains(&k.as_str()) && !known.contains(*k))
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::Validation(format!(
                "config: unknown keys {unknown:?}"
            )));
        }
        let pc: ParamsConfig = table
            .clone()
            .try_into()
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let options: RunOptions = table
            .try_into()
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let params = ModelParams::try_from(pc)?;
        Ok(Self { params, options })
    }

    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        let src = preset_source(name)
            .ok_or_else(|| CliError::Validation(format!("unknown preset `{name}`")))?;
        Self::parse(src)
    }

    /// Fills derived defaults and checks option ranges.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let o = &mut self.options;
        if o.alpha.is_none() {
            o.alpha = Some(self.params.alpha(0));
        }
        let bad = |msg: String| Err(CliError::Validation(msg));
        if o.n_list.is_empty() || o.n_list.contains(&0) {
            return bad("n_list must be a non-empty list of positive integers".into());
        }
        if !(o.epsilon > 0.0) {
            return bad(format!("epsilon = {} must be > 0", o.epsilon));
        }
        if !(o.critical_tolerance >= 0.0) {
            return bad("critical_tolerance must be >= 0".into());
        }
        if o.x0 > self.params.capacity_n {
            return bad(format!(
                "x0 = {} exceeds N = {}",
                o.x0, self.params.capacity_n
            ));
        }
        if !(o.t_end >= 0.0 && o.t_end.is_finite())
            || !(o.ode_t_end >= 0.0 && o.ode_t_end.is_finite())
        {
            return bad("t_end and ode_t_end must be finite and >= 0".into());
        }
        if o.checkpoints < 2 || o.grid_points < 2 {
            return bad("checkpoints and grid_points must be >= 2".into());
        }
        if o.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&o.ode_x0) {
            return bad(format!("ode_x0 = {} must lie in [0, 1]", o.ode_x0));
        }
        if !(o.evolve_tolerance > 0.0 && o.evolve_tolerance < 1.0) {
            return bad("evolve_tolerance must lie in (0, 1)".into());
        }
        if o.mode_window == 0 || !(o.mode_margin >= 0.0) {
            return bad("mode_window must be >= 1 and mode_margin >= 0".into());
        }
        Ok(self)
    }

    /// Flat document that parses back to the same configuration.
    pub fn to_toml(&self) -> String {
        let mut table = toml::Table::try_from(ParamsConfig::from(&self.params))
            .expect("parameters serialize to a table");
        let opts = toml::Table::try_from(&self.options).expect("options serialize to a table");
        table.extend(opts);
        toml::to_string(&table).expect("table serializes")
    }
}
