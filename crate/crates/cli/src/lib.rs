//! Command-line front end: configuration files, ensemble runs and artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod runner;

pub use config::RunConfig;
pub use error::{CliError, Result};

/// Bundled run configurations, selectable with `--preset`.
pub const PRESETS: [(&str, &str); 3] = [
    ("fig1", include_str!("../presets/fig1.json")),
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3", include_str!("../presets/fig3.json")),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::config("preset", format!("unknown preset {name:?}, expected fig1, fig2 or fig3")))?;
    RunConfig::parse(text)
}
