//! Scenario runner for `rydpass`: TOML scenario files, figure presets,
//! parameter sweeps and their CSV/JSON outputs.

pub mod config;
pub mod error;
pub mod output;
pub mod poisson;
pub mod presets;
pub mod scenario;
pub mod sweep;

pub use config::ScenarioConfig;
pub use error::{ExitStatus, Result, RunnerError};
