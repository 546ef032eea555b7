//! One-parameter sweeps over a scenario.

use serde::Serialize;

use rydpass::parallel::{self, Execution};
use rydpass::units::wrap_phase;

use crate::config::ScenarioConfig;
use crate::error::{Result, RunnerError};
use crate::output::table_csv;
use crate::scenario::run_scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub ground_population: f64,
    pub single_rydberg_population: f64,
    /// Final phase of the initial state, wrapped to `(-π, π]`.
    pub initial_state_phase: f64,
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: [&'static str; 5] = [
        "value",
        "P_ground",
        "P_single_rydberg",
        "phase_initial",
        "max_norm_drift",
    ];

    pub fn to_csv(&self) -> String {
        let header: Vec<String> = Self::HEADER.iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.value,
                    r.ground_population,
                    r.single_rydberg_population,
                    r.initial_state_phase,
                    r.max_norm_drift,
                ]
            })
            .collect();
        table_csv(&header, &rows)
    }
}

/// Replaces the value at the dotted `path` (for example `pulse.detuning_mhz`
/// or `model.atoms`). Integer fields accept only integral values. Only
/// existing fields can be swept.
pub fn set_parameter(config: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig> {
    let mut root = config.to_value()?;
    let mut slot = &mut root;
    for key in path.split('.') {
        slot = slot
            .get_mut(key)
            .ok_or_else(|| RunnerError::config(format!("sweep parameter `{path}` does not resolve (at `{key}`)")))?;
    }
    *slot = match slot {
        toml::Value::Integer(_) => {
            if value.fract() != 0.0 || !value.is_finite() {
                return Err(RunnerError::config(format!(
                    "`{path}` is an integer field, got {value}"
                )));
            }
            toml::Value::Integer(value as i64)
        }
        toml::Value::Float(_) => toml::Value::Float(value),
        other => {
            return Err(RunnerError::config(format!(
                "`{path}` holds a {}, only numeric fields can be swept",
                other.type_str()
            )))
        }
    };
    ScenarioConfig::from_value(root)
}

/// Runs `config` once per value. Rows are independent and come back in the
/// order of `values`.
pub fn sweep(config: &ScenarioConfig, path: &str, values: &[f64], execution: Execution) -> Result<SweepTable> {
    let configs = values
        .iter()
        .map(|&v| set_parameter(config, path, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(f64, ScenarioConfig)> = values.iter().copied().zip(configs).collect();
    let rows = parallel::map(execution, &jobs, |(value, cfg)| {
        let run = run_scenario(cfg)?;
        let pops = run.trajectory.final_populations();
        let start = run
            .initial
            .amplitudes
            .iter()
            .position(|a| a.norm_sqr() > 0.5)
            .unwrap_or(0);
        Ok(SweepRow {
            value: *value,
            ground_population: pops[0],
            single_rydberg_population: run.single_rydberg_population().unwrap_or(f64::NAN),
            initial_state_phase: wrap_phase(run.trajectory.final_amplitudes()[start].arg()),
            max_norm_drift: run.trajectory.max_norm_drift(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: path.to_string(),
        rows,
    })
}

/// Parses a value list such as `0,4,5,10` or `1..7` (inclusive integer
/// range); items can be mixed, as in `0.5,1..3`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let parse = |s: &str| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|_| RunnerError::config(format!("bad range bound `{s}` in `{item}`")))
            };
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(RunnerError::config(format!("empty range `{item}`")));
            }
            out.extend((a..=b).map(|v| v as f64));
        } else {
            out.push(
                item.parse::<f64>()
                    .map_err(|_| RunnerError::config(format!("bad sweep value `{item}`")))?,
            );
        }
    }
    Ok(out)
}
