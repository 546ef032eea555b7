//! Declarative scenario files.
//!
//! A scenario is a TOML document. Frequencies are given in MHz (cyclic) and
//! times in µs; every field name carries its unit as a suffix and unknown
//! fields are rejected, so a misspelled unit fails to parse instead of being
//! silently ignored.
//!
//! ```toml
//! name = "two-atom STIRAP"
//!
//! [model]
//! kind = "ensemble_three_level"
//! atoms = 2
//!
//! [pulse]
//! shape = "stirap_gaussian"
//! stokes_peak_mhz = 10.0
//! pump_peak_mhz = 10.0
//! stokes_center_us = -1.0
//! pump_center_us = 1.0
//! width_us = 1.0
//! detuning_mhz = 10.0
//!
//! [grid]
//! steps_per_us = 10000.0
//! ```

use serde::{Deserialize, Serialize};

use rydpass::propagator::DEFAULT_STEPS_PER_US;
use rydpass::statespace::{Representation, MAX_FULL_ATOMS, MAX_SYMMETRIC_ATOMS};

use crate::error::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub pulse: PulseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double: Option<DoubleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forster: Option<ForsterSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindSpec {
    /// One two-level atom.
    Arp,
    /// One three-level ladder atom.
    Stirap,
    EnsembleTwoLevel,
    EnsembleThreeLevel,
    /// Two atoms sharing a Förster pair channel; needs a `[forster]` table and
    /// a `nonlinear` pulse describing the defect.
    Forster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationSpec {
    Full,
    #[default]
    Symmetric,
}

impl From<RepresentationSpec> for Representation {
    fn from(r: RepresentationSpec) -> Self {
        match r {
            RepresentationSpec::Full => Representation::Full,
            RepresentationSpec::Symmetric => Representation::Symmetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKindSpec,
    #[serde(default = "one")]
    pub atoms: usize,
    #[serde(default)]
    pub representation: RepresentationSpec,
}

fn one() -> usize {
    1
}

/// Drive shapes. Peak Rabi frequencies are magnitudes; a field of inverted
/// sign is requested with `negative_field = true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSpec {
    GaussianChirp {
        peak_rabi_mhz: f64,
        width_us: f64,
        center_us: f64,
        chirp_mhz_per_us: f64,
        #[serde(default)]
        negative_field: bool,
    },
    Square {
        rabi_mhz: f64,
        detuning_mhz: f64,
        start_us: f64,
        end_us: f64,
        #[serde(default)]
        negative_field: bool,
    },
    /// Constant Rabi frequency with `s1·x + s2·x^p` detuning about each center.
    Nonlinear {
        rabi_mhz: f64,
        centers_us: Vec<f64>,
        slope_mhz_per_us: f64,
        /// `s2` in MHz/µs^p.
        odd_coeff_mhz: f64,
        odd_power: u32,
        start_us: f64,
        end_us: f64,
    },
    StirapGaussian {
        stokes_peak_mhz: f64,
        pump_peak_mhz: f64,
        stokes_center_us: f64,
        pump_center_us: f64,
        width_us: f64,
        detuning_mhz: f64,
        /// Use `δ·sgn(t)` instead of a constant detuning.
        #[serde(default)]
        sign_switched: bool,
    },
    StirapOptimized {
        amplitude_mhz: f64,
        hyper_width_us: f64,
        hyper_order: u32,
        steepness: f64,
        center_us: f64,
        detuning_mhz: f64,
    },
}

impl PulseSpec {
    pub fn is_two_level(&self) -> bool {
        matches!(
            self,
            PulseSpec::GaussianChirp { .. } | PulseSpec::Square { .. } | PulseSpec::Nonlinear { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleModeSpec {
    Identical,
    PhaseFlipped,
    DetuningSignSwitched,
}

/// Second pulse derived from the first: two-level drives are repeated after
/// `delay_us`, Gaussian STIRAP pairs are mirrored in time about `mirror_about_us`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleSpec {
    pub mode: DoubleModeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_about_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForsterSpec {
    /// Energy defect of the pair channel at zero field.
    pub defect_mhz: f64,
    /// Dipole-dipole coupling at `distance_um`.
    pub coupling_mhz: f64,
    pub distance_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Defaults to the start of the drive's support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_us: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps_per_us: f64,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
}

fn default_steps() -> f64 {
    DEFAULT_STEPS_PER_US
}

fn default_rel_tol() -> f64 {
    1e-10
}

fn default_abs_tol() -> f64 {
    1e-12
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start_us: None,
            end_us: None,
            steps_per_us: default_steps(),
            adaptive: false,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
        }
    }
}

/// Initial basis state, by label (`g2e0r1`, `r0r1`, ...). Defaults to the
/// first basis state, which is always the collective ground state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "yes")]
    pub populations: bool,
    #[serde(default = "yes")]
    pub phases: bool,
    #[serde(default)]
    pub eigenvalues: bool,
    #[serde(default = "yes")]
    pub report: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            populations: true,
            phases: true,
            eigenvalues: false,
            report: true,
        }
    }
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(RunnerError::config(format!("{name} must be finite, got {value}")))
    }
}

fn check_magnitude(name: &str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value < 0.0 {
        return Err(RunnerError::config(format!(
            "{name} is a magnitude and must be nonnegative, got {value}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value <= 0.0 {
        return Err(RunnerError::config(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let config: ScenarioConfig = value.try_into()?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        Ok(toml::Value::try_from(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_model()?;
        self.validate_pulse()?;
        self.validate_grid()
    }

    fn validate_model(&self) -> Result<()> {
        let m = &self.model;
        if m.atoms == 0 {
            return Err(RunnerError::config("model.atoms must be at least 1"));
        }
        let limit = match m.representation {
            RepresentationSpec::Full => MAX_FULL_ATOMS,
            RepresentationSpec::Symmetric => MAX_SYMMETRIC_ATOMS,
        };
        if m.atoms > limit {
            return Err(RunnerError::config(format!(
                "model.atoms = {} exceeds the {:?} representation limit {limit}",
                m.atoms, m.representation
            )));
        }
        if matches!(m.kind, ModelKindSpec::Arp | ModelKindSpec::Stirap) && m.atoms != 1 {
            return Err(RunnerError::config(format!(
                "model kind {:?} describes one atom",
                m.kind
            )));
        }
        let wants_two_level = matches!(m.kind, ModelKindSpec::Arp | ModelKindSpec::EnsembleTwoLevel);
        let wants_three_level = matches!(m.kind, ModelKindSpec::Stirap | ModelKindSpec::EnsembleThreeLevel);
        if wants_two_level && !self.pulse.is_two_level() {
            return Err(RunnerError::config("two-level models need a two-level pulse shape"));
        }
        if wants_three_level && self.pulse.is_two_level() {
            return Err(RunnerError::config("three-level models need a STIRAP pulse shape"));
        }
        match (m.kind, &self.forster) {
            (ModelKindSpec::Forster, None) => {
                return Err(RunnerError::config("model kind forster needs a [forster] table"))
            }
            (ModelKindSpec::Forster, Some(f)) => {
                if !matches!(self.pulse, PulseSpec::Nonlinear { .. }) {
                    return Err(RunnerError::config(
                        "model kind forster needs a nonlinear detuning pulse",
                    ));
                }
                check_finite("forster.defect_mhz", f.defect_mhz)?;
                check_positive("forster.coupling_mhz", f.coupling_mhz)?;
                check_positive("forster.distance_um", f.distance_um)?;
            }
            (_, Some(_)) => return Err(RunnerError::config("[forster] is only valid with model kind forster")),
            (_, None) => {}
        }
        Ok(())
    }

    fn validate_pulse(&self) -> Result<()> {
        match &self.pulse {
            PulseSpec::GaussianChirp {
                peak_rabi_mhz,
                width_us,
                center_us,
                chirp_mhz_per_us,
                ..
            } => {
                check_magnitude("pulse.peak_rabi_mhz", *peak_rabi_mhz)?;
                check_positive("pulse.width_us", *width_us)?;
                check_finite("pulse.center_us", *center_us)?;
                check_finite("pulse.chirp_mhz_per_us", *chirp_mhz_per_us)?;
            }
            PulseSpec::Square {
                rabi_mhz,
                detuning_mhz,
                start_us,
                end_us,
                ..
            } => {
                check_magnitude("pulse.rabi_mhz", *rabi_mhz)?;
                check_finite("pulse.detuning_mhz", *detuning_mhz)?;
                check_interval("pulse", *start_us, *end_us)?;
            }
            PulseSpec::Nonlinear {
                rabi_mhz,
                centers_us,
                slope_mhz_per_us,
                odd_coeff_mhz,
                start_us,
                end_us,
                ..
            } => {
                check_magnitude("pulse.rabi_mhz", *rabi_mhz)?;
                check_finite("pulse.slope_mhz_per_us", *slope_mhz_per_us)?;
                check_finite("pulse.odd_coeff_mhz", *odd_coeff_mhz)?;
                check_interval("pulse", *start_us, *end_us)?;
                for c in centers_us {
                    check_finite("pulse.centers_us", *c)?;
                }
            }
            PulseSpec::StirapGaussian {
                stokes_peak_mhz,
                pump_peak_mhz,
                stokes_center_us,
                pump_center_us,
                width_us,
                detuning_mhz,
                ..
            } => {
                check_magnitude("pulse.stokes_peak_mhz", *stokes_peak_mhz)?;
                check_magnitude("pulse.pump_peak_mhz", *pump_peak_mhz)?;
                check_finite("pulse.stokes_center_us", *stokes_center_us)?;
                check_finite("pulse.pump_center_us", *pump_center_us)?;
                check_positive("pulse.width_us", *width_us)?;
                check_finite("pulse.detuning_mhz", *detuning_mhz)?;
            }
            PulseSpec::StirapOptimized {
                amplitude_mhz,
                hyper_width_us,
                steepness,
                center_us,
                detuning_mhz,
                ..
            } => {
                check_magnitude("pulse.amplitude_mhz", *amplitude_mhz)?;
                check_positive("pulse.hyper_width_us", *hyper_width_us)?;
                check_positive("pulse.steepness", *steepness)?;
                check_finite("pulse.center_us", *center_us)?;
                check_finite("pulse.detuning_mhz", *detuning_mhz)?;
            }
        }
        if let Some(d) = &self.double {
            match (&self.pulse, d.delay_us, d.mirror_about_us) {
                (PulseSpec::StirapGaussian { .. }, None, Some(about)) => check_finite("double.mirror_about_us", about)?,
                (PulseSpec::StirapGaussian { .. }, _, _) => {
                    return Err(RunnerError::config(
                        "a doubled STIRAP pair needs double.mirror_about_us and no delay",
                    ))
                }
                (PulseSpec::StirapOptimized { .. }, _, _) => {
                    return Err(RunnerError::config("optimized STIRAP pairs cannot be doubled"))
                }
                (_, Some(delay), None) => check_positive("double.delay_us", delay)?,
                _ => {
                    return Err(RunnerError::config(
                        "a doubled two-level pulse needs double.delay_us and no mirror time",
                    ))
                }
            }
        }
        Ok(())
    }

    fn validate_grid(&self) -> Result<()> {
        let g = &self.grid;
        check_positive("grid.steps_per_us", g.steps_per_us)?;
        if let (Some(a), Some(b)) = (g.start_us, g.end_us) {
            check_interval("grid", a, b)?;
        }
        if let Some(a) = g.start_us {
            check_finite("grid.start_us", a)?;
        }
        if let Some(b) = g.end_us {
            check_finite("grid.end_us", b)?;
        }
        if g.adaptive {
            check_positive("grid.rel_tol", g.rel_tol)?;
            check_positive("grid.abs_tol", g.abs_tol)?;
        }
        Ok(())
    }
}

fn check_interval(section: &str, start: f64, end: f64) -> Result<()> {
    check_finite(&format!("{section}.start_us"), start)?;
    check_finite(&format!("{section}.end_us"), end)?;
    if start >= end {
        return Err(RunnerError::config(format!(
            "{section}: start_us ({start}) must precede end_us ({end})"
        )));
    }
    Ok(())
}
