//! Turning a [`ScenarioConfig`] into a model and running it.

use serde::Serialize;

use rydpass::adiabatic::adiabaticity_margin;
use rydpass::hamiltonians::{ForsterChannelParams, HamiltonianModel};
use rydpass::propagator::{eigen_track_at, propagate, EigenTrack, TimeGrid, Trajectory};
use rydpass::pulses::{
    DetuningRule, DoubleMode, DoubleSequence, FieldSign, GaussianChirpPulse, NonlinearDetuningPulse, OddPower,
    OptimizedStirapPair, SquarePulse, StirapPair, StirapPulse, TwoLevelPulse, Window,
};
use rydpass::statespace::CollectiveState;
use rydpass::units::{mhz, wrap_phase};

use crate::config::{DoubleModeSpec, ModelKindSpec, PulseSpec, ScenarioConfig};
use crate::error::{Result, RunnerError};

impl From<DoubleModeSpec> for DoubleMode {
    fn from(m: DoubleModeSpec) -> Self {
        match m {
            DoubleModeSpec::Identical => DoubleMode::Identical,
            DoubleModeSpec::PhaseFlipped => DoubleMode::PhaseFlipped,
            DoubleModeSpec::DetuningSignSwitched => DoubleMode::DetuningSignSwitched,
        }
    }
}

fn field_sign(negative: bool) -> FieldSign {
    if negative {
        FieldSign::Negative
    } else {
        FieldSign::Positive
    }
}

fn single_two_level(spec: &PulseSpec) -> Result<TwoLevelPulse> {
    Ok(match *spec {
        PulseSpec::GaussianChirp {
            peak_rabi_mhz,
            width_us,
            center_us,
            chirp_mhz_per_us,
            negative_field,
        } => GaussianChirpPulse::new(mhz(peak_rabi_mhz), width_us, center_us, mhz(chirp_mhz_per_us))?
            .with_field_sign(field_sign(negative_field))
            .into(),
        PulseSpec::Square {
            rabi_mhz,
            detuning_mhz,
            start_us,
            end_us,
            negative_field,
        } => SquarePulse::new(
            field_sign(negative_field).factor() * mhz(rabi_mhz),
            mhz(detuning_mhz),
            Window::new(start_us, end_us)?,
        )
        .into(),
        PulseSpec::Nonlinear { .. } => nonlinear_pulse(spec)?.into(),
        _ => return Err(RunnerError::config("expected a two-level pulse shape")),
    })
}

fn nonlinear_pulse(spec: &PulseSpec) -> Result<NonlinearDetuningPulse> {
    match spec {
        PulseSpec::Nonlinear {
            rabi_mhz,
            centers_us,
            slope_mhz_per_us,
            odd_coeff_mhz,
            odd_power,
            start_us,
            end_us,
        } => Ok(NonlinearDetuningPulse::new(
            mhz(*rabi_mhz),
            centers_us.clone(),
            mhz(*slope_mhz_per_us),
            mhz(*odd_coeff_mhz),
            OddPower::from_exponent(*odd_power)?,
            Window::new(*start_us, *end_us)?,
        )?),
        _ => Err(RunnerError::config("expected a nonlinear pulse shape")),
    }
}

pub fn two_level_pulse(config: &ScenarioConfig) -> Result<TwoLevelPulse> {
    let first = single_two_level(&config.pulse)?;
    Ok(match &config.double {
        None => first,
        Some(d) => {
            let delay = d
                .delay_us
                .ok_or_else(|| RunnerError::config("double.delay_us is required for two-level pulses"))?;
            DoubleSequence::repeated(first, delay, d.mode.into()).into()
        }
    })
}

pub fn stirap_pulse(config: &ScenarioConfig) -> Result<StirapPulse> {
    match config.pulse {
        PulseSpec::StirapGaussian {
            stokes_peak_mhz,
            pump_peak_mhz,
            stokes_center_us,
            pump_center_us,
            width_us,
            detuning_mhz,
            sign_switched,
        } => {
            let rule = if sign_switched {
                DetuningRule::SignOfTime
            } else {
                DetuningRule::Constant
            };
            let pair = StirapPair::new(
                mhz(stokes_peak_mhz),
                mhz(pump_peak_mhz),
                stokes_center_us,
                pump_center_us,
                width_us,
                mhz(detuning_mhz),
            )?
            .with_rule(rule);
            Ok(match &config.double {
                None => pair.into(),
                Some(d) => {
                    let about = d
                        .mirror_about_us
                        .ok_or_else(|| RunnerError::config("double.mirror_about_us is required for STIRAP pairs"))?;
                    DoubleSequence::mirrored(pair, about, d.mode.into()).into()
                }
            })
        }
        PulseSpec::StirapOptimized {
            amplitude_mhz,
            hyper_width_us,
            hyper_order,
            steepness,
            center_us,
            detuning_mhz,
        } => Ok(OptimizedStirapPair::new(
            mhz(amplitude_mhz),
            hyper_width_us,
            hyper_order,
            steepness,
            center_us,
            mhz(detuning_mhz),
        )?
        .into()),
        _ => Err(RunnerError::config("expected a STIRAP pulse shape")),
    }
}

pub fn build_model(config: &ScenarioConfig) -> Result<HamiltonianModel> {
    let m = &config.model;
    Ok(match m.kind {
        ModelKindSpec::Arp => HamiltonianModel::arp(two_level_pulse(config)?),
        ModelKindSpec::Stirap => HamiltonianModel::stirap(stirap_pulse(config)?),
        ModelKindSpec::EnsembleTwoLevel => {
            HamiltonianModel::ensemble_two_level(m.atoms, m.representation.into(), two_level_pulse(config)?)?
        }
        ModelKindSpec::EnsembleThreeLevel => {
            HamiltonianModel::ensemble_three_level(m.atoms, m.representation.into(), stirap_pulse(config)?)?
        }
        ModelKindSpec::Forster => {
            let f = config
                .forster
                .as_ref()
                .ok_or_else(|| RunnerError::config("model kind forster needs a [forster] table"))?;
            let channel = ForsterChannelParams::with_coupling_at(
                mhz(f.defect_mhz),
                mhz(f.coupling_mhz),
                f.distance_um,
                nonlinear_pulse(&config.pulse)?,
            )?;
            HamiltonianModel::forster(channel)
        }
    })
}

pub fn build_grid(config: &ScenarioConfig, model: &HamiltonianModel) -> Result<TimeGrid> {
    let support = model.support();
    let g = &config.grid;
    let window = Window::new(g.start_us.unwrap_or(support.start), g.end_us.unwrap_or(support.end))?;
    let grid = TimeGrid::with_density(window, g.steps_per_us)?;
    Ok(if g.adaptive {
        grid.with_adaptive(g.rel_tol, g.abs_tol)
    } else {
        grid
    })
}

pub fn initial_state(config: &ScenarioConfig, model: &HamiltonianModel) -> Result<CollectiveState> {
    let index = match &config.initial.label {
        None => 0,
        Some(label) => model.labels().iter().position(|l| l == label).ok_or_else(|| {
            RunnerError::config(format!(
                "initial.label `{label}` is not a basis state; expected one of {}",
                model.labels().join(", ")
            ))
        })?,
    };
    Ok(CollectiveState::basis_vector(model.dim(), index))
}

/// Everything produced by one run of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub name: String,
    pub model: HamiltonianModel,
    pub initial: CollectiveState,
    pub grid: TimeGrid,
    pub trajectory: Trajectory,
    /// Eigenvalues at the recorded sample times, when the config asks for
    /// them.
    pub track: Option<EigenTrack>,
}

/// Scalar results of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub labels: Vec<String>,
    pub window_us: [f64; 2],
    pub samples: usize,
    pub final_populations: Vec<f64>,
    /// Wrapped to `(-π, π]`.
    pub final_phases: Vec<f64>,
    /// Total population of the singly excited Rydberg states.
    pub single_rydberg_population: Option<f64>,
    pub max_norm_drift: f64,
    /// Only for drives equivalent to a two-level system.
    pub max_adiabaticity_margin: Option<f64>,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let model = build_model(config)?;
    let grid = build_grid(config, &model)?;
    let initial = initial_state(config, &model)?;
    let trajectory = propagate(&model, &initial, &grid)?;
    let track = if config.outputs.eigenvalues {
        Some(eigen_track_at(&model, &trajectory.times, &initial)?)
    } else {
        None
    };
    Ok(ScenarioRun {
        name: config.name.clone().unwrap_or_else(|| "scenario".into()),
        model,
        initial,
        grid,
        trajectory,
        track,
    })
}

impl ScenarioRun {
    pub fn single_rydberg_population(&self) -> Option<f64> {
        let indices = self.model.single_rydberg_indices();
        if indices.is_empty() {
            return None;
        }
        let pops = self.trajectory.final_populations();
        Some(indices.iter().map(|&k| pops[k]).sum())
    }

    pub fn report(&self) -> ScenarioReport {
        let traj = &self.trajectory;
        ScenarioReport {
            name: self.name.clone(),
            labels: traj.labels.clone(),
            window_us: [self.grid.t_start, self.grid.t_end],
            samples: traj.len(),
            final_populations: traj.final_populations().to_vec(),
            final_phases: traj.final_amplitudes().iter().map(|a| wrap_phase(a.arg())).collect(),
            single_rydberg_population: self.single_rydberg_population(),
            max_norm_drift: traj.max_norm_drift(),
            max_adiabaticity_margin: adiabaticity_margin(&self.model, &self.grid).ok().map(|p| p.max()),
        }
    }
}
