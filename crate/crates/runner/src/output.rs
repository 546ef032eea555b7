//! CSV and JSON emitters.
//!
//! Numbers are written in shortest round-trip scientific notation, so a CSV
//! reproduces the computed values bit for bit and two runs of the same
//! scenario produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rydpass::propagator::{EigenTrack, Trajectory};

use crate::config::OutputSpec;
use crate::error::{Result, RunnerError};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "RYDPASS_OUT";

/// A named file produced by a run, held in memory until written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(file_name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            file_name: file_name.into(),
            contents: contents.into(),
        }
    }

    pub fn json(file_name: impl Into<String>, value: &impl Serialize) -> Result<Self> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| RunnerError::Integration(format!("cannot serialize report: {e}")))?;
        Ok(Self::new(file_name, text + "\n"))
    }
}

pub fn format_number(x: f64) -> String {
    format!("{x:e}")
}

/// Header-plus-rows CSV; every row must have one value per column.
pub fn table_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory write");
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(|&x| format_number(x)))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is ASCII")
}

/// Time series: `t`, then `P_<label>` per state, then `phase_<label>` per
/// state (unwrapped, `NaN` where the population is below the phase floor),
/// then any extra columns.
pub fn trajectory_csv(trajectory: &Trajectory, outputs: &OutputSpec, extra: &[(String, Vec<f64>)]) -> String {
    let mut header = vec!["t".to_string()];
    if outputs.populations {
        header.extend(trajectory.labels.iter().map(|l| format!("P_{l}")));
    }
    if outputs.phases {
        header.extend(trajectory.labels.iter().map(|l| format!("phase_{l}")));
    }
    header.extend(extra.iter().map(|(name, _)| name.clone()));
    let rows: Vec<Vec<f64>> = (0..trajectory.len())
        .map(|i| {
            let mut row = vec![trajectory.times[i]];
            if outputs.populations {
                row.extend(&trajectory.populations[i]);
            }
            if outputs.phases {
                row.extend(&trajectory.phases[i]);
            }
            row.extend(extra.iter().map(|(_, col)| col[i]));
            row
        })
        .collect();
    table_csv(&header, &rows)
}

/// Tracked eigenvalues: `t`, `E_0 .. E_{d-1}` in continuity order, then the
/// branch of the initial state as `E_initial`.
pub fn eigenvalue_csv(track: &EigenTrack) -> String {
    let dim = track.eigenvalues.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|k| format!("E_{k}")));
    header.push("E_initial".into());
    let branch = track.initial_branch();
    let rows: Vec<Vec<f64>> = track
        .times
        .iter()
        .zip(&track.eigenvalues)
        .zip(&branch)
        .map(|((&t, values), &e)| {
            let mut row = vec![t];
            row.extend(values);
            row.push(e);
            row
        })
        .collect();
    table_csv(&header, &rows)
}

/// Output directory: the explicit flag, else the environment override, else
/// `./rydpass-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rydpass-out"))
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunnerError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.file_name);
            fs::write(&path, &a.contents).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}
