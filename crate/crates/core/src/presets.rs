//! Named parameter sets shipped with the crate.

use crate::error::{AlleeError, Result};
use crate::model::ModelParams;

pub const PRESET_NAMES: [&str; 4] = ["fig1a", "fig1b", "fig2a", "fig2b"];

pub fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1a" => include_str!("../../../presets/fig1a.toml"),
        "fig1b" => include_str!("../../../presets/fig1b.toml"),
        "fig2a" => include_str!("../../../presets/fig2a.toml"),
        "fig2b" => include_str!("../../../presets/fig2b.toml"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ModelParams> {
    let src = preset_source(name).ok_or_else(|| {
        AlleeError::Config(format!(
            "unknown preset `{name}` (expected one of {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    ModelParams::from_config_str(src)
}
