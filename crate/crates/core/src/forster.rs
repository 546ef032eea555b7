//! Double adiabatic passage across a Stark-tuned Förster resonance.
//!
//! The pair starts in the initial channel `r0r1` and the field-tuned energy
//! defect `δ_F(t)` is swept through zero twice. Scenarios carry the channel,
//! the passage centers and the time grid; runs report the final amplitude of
//! the initial channel together with its adiabatic phase prediction.

use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiabatic::{adiabaticity_margin, predict_component_phase, AdiabaticError};
use crate::hamiltonians::{ForsterChannelParams, HamiltonianError, HamiltonianModel};
use crate::parallel::{self, Execution};
use crate::propagator::{eigen_track, propagate, PropagationError, TimeGrid, Trajectory};
use crate::pulses::{NonlinearDetuningPulse, OddPower, PulseError, TwoLevelDrive, Window};
use crate::statespace::CollectiveState;
use crate::units::{mhz, wrap_phase};

/// Integration density for Förster runs; the defect reaches hundreds of MHz
/// at the window edges.
pub const FORSTER_STEPS_PER_US: f64 = 1e5;

/// Margin above which a passage is flagged.
pub const FORSTER_MARGIN_THRESHOLD: f64 = 0.05;

/// Largest relative distance change accepted by [`distance_sensitivity`].
pub const MAX_RELATIVE_DISTANCE_CHANGE: f64 = 0.2;

/// Bound on `|phase - π|` for distance changes within ±10 %. The unperturbed
/// run sits within 1e-9 rad of π, so this leaves room for integration error
/// only.
pub const DISTANCE_PHASE_TOLERANCE: f64 = 0.01;

/// Energy defect of the Fig. 12 channel at zero field, MHz.
pub const ZERO_FIELD_DEFECT_MHZ: f64 = 152.0;
/// Interatomic distance of the Fig. 12 channel, µm.
pub const DEFAULT_DISTANCE_UM: f64 = 15.5;
/// Coupling standing in for the unknown dipole-dipole coefficient, MHz.
pub const DEFAULT_COUPLING_MHZ: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForsterError {
    #[error("a double passage needs exactly two centers, got {0}")]
    CenterCount(usize),
    #[error("passage segment {segment} does not cross resonance exactly once")]
    NoSingleCrossing { segment: usize },
    #[error("relative distance change {0} outside ±{MAX_RELATIVE_DISTANCE_CHANGE}")]
    DistanceChangeOutOfRange(f64),
    #[error("the sweep never reaches a defect of {0} rad/µs")]
    DefectOutOfReach(f64),
    #[error("field table: {0}")]
    Table(String),
    #[error("field-to-energy table is not monotone between {low} and {high} V/cm")]
    NonMonotone { low: f64, high: f64 },
    #[error("field {0} V/cm lies outside the table")]
    FieldOutOfRange(f64),
    #[error("fit needs at least two samples away from the centers")]
    TooFewSamples,
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Model(#[from] HamiltonianError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Adiabatic(#[from] AdiabaticError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForsterScenario {
    pub channel: ForsterChannelParams,
    pub first_center: f64,
    pub second_center: f64,
    pub grid: TimeGrid,
}

impl ForsterScenario {
    /// Checks that the channel waveform describes two passages, each
    /// crossing resonance once inside the grid window.
    pub fn new(channel: ForsterChannelParams, grid: TimeGrid) -> Result<Self, ForsterError> {
        let wave = &channel.detuning_waveform;
        let &[first_center, second_center] = wave.centers.as_slice() else {
            return Err(ForsterError::CenterCount(wave.centers.len()));
        };
        let switch = wave.segment_boundaries()[0];
        let segments = [(grid.t_start, switch), (switch, grid.t_end)];
        for (k, &(a, b)) in segments.iter().enumerate() {
            if count_sign_changes(wave, a, b) != 1 {
                return Err(ForsterError::NoSingleCrossing { segment: k });
            }
        }
        Ok(Self {
            channel,
            first_center,
            second_center,
            grid,
        })
    }

    /// The channel with the given coupling (rad/µs) at the default distance,
    /// swept by `δ_F = s1·x + s2·x⁵` about `t1 = -0.3 µs`, `t2 = 0.2993 µs`
    /// over the interval on which the defect stays below its zero-field
    /// value.
    pub fn fig12(coupling: f64, steps_per_us: f64) -> Result<Self, ForsterError> {
        let defect = mhz(ZERO_FIELD_DEFECT_MHZ);
        let (t1, t2) = (-0.3, 0.2993);
        let placeholder = Window::new(t1, t2)?;
        let mut wave = NonlinearDetuningPulse::new(
            0.0,
            vec![t1, t2],
            mhz(22.6),
            mhz(28800.0),
            OddPower::Quintic,
            placeholder,
        )?;
        let reach = profile_reach(&wave, defect)?;
        wave.window = Window::new(t1 - reach, t2 + reach)?;
        let window = wave.window;
        let channel = ForsterChannelParams::with_coupling_at(defect, coupling, DEFAULT_DISTANCE_UM, wave)?;
        Self::new(channel, TimeGrid::with_density(window, steps_per_us)?)
    }

    pub fn window(&self) -> Window {
        self.grid.window()
    }

    pub fn with_channel(&self, channel: ForsterChannelParams) -> Self {
        Self {
            channel,
            ..self.clone()
        }
    }
}

/// Offset `x > 0` at which `|profile(±x)| = defect`.
fn profile_reach(wave: &NonlinearDetuningPulse, defect: f64) -> Result<f64, ForsterError> {
    let f = |x: f64| wave.profile(x).abs() - defect;
    let mut hi = 1e-3;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(ForsterError::DefectOutOfReach(defect));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn count_sign_changes(wave: &NonlinearDetuningPulse, a: f64, b: f64) -> usize {
    const SAMPLES: usize = 2000;
    let last = b.next_down();
    let values: Vec<f64> = (0..=SAMPLES)
        .map(|i| wave.detuning((a + (b - a) * i as f64 / SAMPLES as f64).min(last)))
        .filter(|v| *v != 0.0)
        .collect();
    values.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublePassageResult {
    pub trajectory: Trajectory,
    pub final_amplitude: Complex64,
    /// Unwrapped phase of the initial channel at the end of the run.
    pub final_phase: f64,
    pub population_error: f64,
    /// Adiabatic prediction for the phase of the initial channel: `-∫E dt`
    /// along the occupied branch plus the sign of the transported eigenvector.
    pub predicted_phase: f64,
    pub max_margin: f64,
    /// Set when `max_margin` exceeds [`FORSTER_MARGIN_THRESHOLD`].
    pub flagged: bool,
}

pub fn run_double_passage(scenario: &ForsterScenario) -> Result<DoublePassageResult, ForsterError> {
    let model = HamiltonianModel::forster(scenario.channel.clone());
    let psi0 = CollectiveState::basis_vector(model.dim(), 0);
    let trajectory = propagate(&model, &psi0, &scenario.grid)?;
    let final_amplitude = trajectory.final_amplitudes()[0];
    let final_phase = trajectory.final_phase(0);
    let track = eigen_track(&model, &scenario.grid, &psi0)?;
    let predicted = predict_component_phase(&track, &psi0, 0);
    let max_margin = adiabaticity_margin(&model, &scenario.grid)?.max();
    Ok(DoublePassageResult {
        population_error: 1.0 - final_amplitude.norm_sqr(),
        final_amplitude,
        final_phase,
        predicted_phase: *predicted.last().unwrap_or(&0.0),
        max_margin,
        flagged: max_margin > FORSTER_MARGIN_THRESHOLD,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub relative_change: f64,
    pub distance: f64,
    pub coupling: f64,
    /// Final phase of the initial channel, wrapped to `(-π, π]`.
    pub phase: f64,
    /// `|phase - π|` measured on the circle.
    pub phase_deviation: f64,
    pub population_error: f64,
    pub max_margin: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub rows: Vec<SensitivityRow>,
    pub max_phase_deviation: f64,
    pub tolerance: f64,
}

/// Final phase for the distance scaled by `1 + Δ` for every `Δ`.
pub fn distance_sensitivity(
    scenario: &ForsterScenario,
    relative_changes: &[f64],
    execution: Execution,
) -> Result<SensitivityTable, ForsterError> {
    if let Some(&bad) = relative_changes
        .iter()
        .find(|d| d.is_nan() || d.abs() > MAX_RELATIVE_DISTANCE_CHANGE)
    {
        return Err(ForsterError::DistanceChangeOutOfRange(bad));
    }
    let rows = parallel::map(execution, relative_changes, |&delta| {
        let channel = scenario
            .channel
            .at_distance(scenario.channel.distance * (1.0 + delta))?;
        let result = run_double_passage(&scenario.with_channel(channel.clone()))?;
        let phase = wrap_phase(result.final_amplitude.arg());
        Ok(SensitivityRow {
            relative_change: delta,
            distance: channel.distance,
            coupling: channel.coupling(),
            phase,
            phase_deviation: wrap_phase(phase - std::f64::consts::PI).abs(),
            population_error: result.population_error,
            max_margin: result.max_margin,
            flagged: result.flagged,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, ForsterError>>()?;
    let max_phase_deviation = rows.iter().map(|r| r.phase_deviation).fold(0.0, f64::max);
    Ok(SensitivityTable {
        rows,
        max_phase_deviation,
        tolerance: DISTANCE_PHASE_TOLERANCE,
    })
}

/// Energy defect as a function of a static electric field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnergyTable {
    /// Strictly increasing, V/cm.
    pub fields: Vec<f64>,
    /// Defect at each field, MHz.
    pub energies: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct TableRow {
    field: f64,
    energy: f64,
}

impl FieldEnergyTable {
    pub fn new(fields: Vec<f64>, energies: Vec<f64>) -> Result<Self, ForsterError> {
        if fields.len() != energies.len() || fields.len() < 2 {
            return Err(ForsterError::Table("need at least two rows of equal length".into()));
        }
        if fields.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ForsterError::Table("fields must be strictly increasing".into()));
        }
        Ok(Self { fields, energies })
    }

    /// Parses two columns `field,energy` (V/cm, MHz) with a header row.
    pub fn from_csv(reader: impl Read) -> Result<Self, ForsterError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut fields = Vec::new();
        let mut energies = Vec::new();
        for row in rdr.deserialize::<TableRow>() {
            let row = row.map_err(|e| ForsterError::Table(e.to_string()))?;
            fields.push(row.field);
            energies.push(row.energy);
        }
        Self::new(fields, energies)
    }

    fn bracket(&self, field: f64) -> Result<usize, ForsterError> {
        let (first, last) = (self.fields[0], self.fields[self.fields.len() - 1]);
        if !(first..=last).contains(&field) {
            return Err(ForsterError::FieldOutOfRange(field));
        }
        Ok(self
            .fields
            .partition_point(|&f| f <= field)
            .clamp(1, self.fields.len() - 1)
            - 1)
    }

    /// Linearly interpolated defect, MHz.
    pub fn energy_at(&self, field: f64) -> Result<f64, ForsterError> {
        let k = self.bracket(field)?;
        let (f0, f1) = (self.fields[k], self.fields[k + 1]);
        let (e0, e1) = (self.energies[k], self.energies[k + 1]);
        Ok(e0 + (e1 - e0) * (field - f0) / (f1 - f0))
    }

    /// Rejects tables whose energy is not strictly monotone over `[low, high]`.
    pub fn check_monotone(&self, low: f64, high: f64) -> Result<(), ForsterError> {
        let (a, b) = (self.bracket(low)?, self.bracket(high)?);
        let diffs: Vec<f64> = (a..=b).map(|k| self.energies[k + 1] - self.energies[k]).collect();
        let increasing = diffs.iter().all(|&d| d > 0.0);
        let decreasing = diffs.iter().all(|&d| d < 0.0);
        if increasing || decreasing {
            Ok(())
        } else {
            Err(ForsterError::NonMonotone { low, high })
        }
    }

    /// Field at which the defect vanishes on the first sign change.
    pub fn resonance_field(&self) -> Option<f64> {
        self.fields
            .windows(2)
            .zip(self.energies.windows(2))
            .find(|(_, e)| e[0] == 0.0 || e[0].signum() != e[1].signum())
            .map(|(f, e)| f[0] + (f[1] - f[0]) * e[0] / (e[0] - e[1]))
    }
}

/// Least-squares fit of a sweep to `s1·x + s2·x^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectFit {
    pub waveform: NonlinearDetuningPulse,
    /// Root-mean-square residual, rad/µs.
    pub residual_rms: f64,
    pub samples: usize,
}

/// Maps a field waveform through `table` and fits the resulting defect with
/// one `(s1, s2)` pair shared by all passages about `centers`.
pub fn effective_defect_from_field(
    table: &FieldEnergyTable,
    field_waveform: &[(f64, f64)],
    centers: Vec<f64>,
    odd_power: OddPower,
) -> Result<DefectFit, ForsterError> {
    let (low, high) = field_waveform
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, e)| {
            (lo.min(e), hi.max(e))
        });
    table.check_monotone(low, high)?;
    let times: Vec<f64> = field_waveform.iter().map(|&(t, _)| t).collect();
    let window = Window::new(
        times.iter().copied().fold(f64::INFINITY, f64::min),
        times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )?;
    let template = NonlinearDetuningPulse::new(0.0, centers, 0.0, 0.0, odd_power, window)?;
    let p = odd_power.exponent();

    let mut points = Vec::with_capacity(field_waveform.len());
    for &(t, field) in field_waveform {
        let x = t - template.centers[template.segment(t)];
        points.push((x, mhz(table.energy_at(field)?)));
    }
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &points {
        let (u, v) = (x, x.powi(p));
        a11 += u * u;
        a12 += u * v;
        a22 += v * v;
        b1 += u * y;
        b2 += v * y;
    }
    let det = a11 * a22 - a12 * a12;
    if points.len() < 2 || det.abs() <= 1e-300 || det.abs() <= 1e-14 * a11 * a22 {
        return Err(ForsterError::TooFewSamples);
    }
    let slope = (b1 * a22 - b2 * a12) / det;
    let odd_coeff = (a11 * b2 - a12 * b1) / det;
    let residual_rms = (points
        .iter()
        .map(|&(x, y)| (slope * x + odd_coeff * x.powi(p) - y).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok(DefectFit {
        waveform: NonlinearDetuningPulse {
            slope,
            odd_coeff,
            ..template
        },
        residual_rms,
        samples: points.len(),
    })
}
