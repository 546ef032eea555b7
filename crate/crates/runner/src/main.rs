use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rydpass::parallel::Execution;
use rydpass_cli::output::{eigenvalue_csv, resolve_out_dir, trajectory_csv, write_artifacts, Artifact};
use rydpass_cli::presets::{preset_config, run_preset, PresetOptions, PRESET_NAMES};
use rydpass_cli::scenario::run_scenario;
use rydpass_cli::sweep::{parse_values, sweep};
use rydpass_cli::{Result, RunnerError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "rydpass",
    version,
    about = "Adiabatic passage in blockaded Rydberg ensembles"
)]
struct Cli {
    /// Output directory (falls back to $RYDPASS_OUT, then ./rydpass-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integration steps per µs, replacing the scenario's own density.
    #[arg(long, global = true)]
    steps_per_us: Option<f64>,
    /// Run independent jobs one after another.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML scenario file.
    Run { config: PathBuf },
    /// Run a named figure preset.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
    },
    /// Write a preset's representative scenario as TOML to stdout.
    Config {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
    },
    /// Run a scenario once per value of one numeric field.
    Sweep {
        config: PathBuf,
        /// Dotted field path, such as `pulse.detuning_mhz`.
        #[arg(long)]
        param: String,
        /// Comma-separated values; `a..b` is an inclusive integer range.
        #[arg(long)]
        values: String,
    },
}

fn read_config(path: &Path, steps: Option<f64>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = ScenarioConfig::from_toml(&text)?;
    if let Some(s) = steps {
        config.grid.steps_per_us = s;
    }
    config.validate()?;
    Ok(config)
}

fn stem(config: &ScenarioConfig, path: &Path) -> String {
    config.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    })
}

fn execute(cli: Cli) -> Result<()> {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let artifacts = match &cli.command {
        Command::Run { config: path } => {
            let config = read_config(path, cli.steps_per_us)?;
            let name = stem(&config, path);
            let run = run_scenario(&config)?;
            let mut files = vec![Artifact::new(
                format!("{name}.csv"),
                trajectory_csv(&run.trajectory, &config.outputs, &[]),
            )];
            if let Some(track) = &run.track {
                files.push(Artifact::new(format!("{name}_eigenvalues.csv"), eigenvalue_csv(track)));
            }
            if config.outputs.report {
                files.push(Artifact::json(format!("{name}_report.json"), &run.report())?);
            }
            files
        }
        Command::Preset { name } => run_preset(
            name,
            &PresetOptions {
                steps_per_us: cli.steps_per_us,
                execution,
            },
        )?,
        Command::Config { name } => {
            print!("{}", preset_config(name, cli.steps_per_us)?.to_toml()?);
            return Ok(());
        }
        Command::Sweep {
            config: path,
            param,
            values,
        } => {
            let config = read_config(path, cli.steps_per_us)?;
            let values = parse_values(values)?;
            let table = sweep(&config, param, &values, execution)?;
            let name = stem(&config, path);
            vec![
                Artifact::new(format!("{name}_sweep.csv"), table.to_csv()),
                Artifact::json(format!("{name}_sweep.json"), &table)?,
            ]
        }
    };
    let dir = resolve_out_dir(cli.out);
    for path in write_artifacts(&dir, &artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rydpass: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
