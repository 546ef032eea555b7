//! Figure presets: fixed scenarios with their trajectories and the scalar
//! metrics each figure is judged by.
//!
//! Every preset returns a typed summary together with the files it would
//! write (`<name>_*.csv` and `<name>_summary.json`), so callers can check
//! metrics without touching the file system.

use num_complex::Complex64;
use serde::Serialize;

use rydpass::adiabatic::{
    lower_dressed_prediction, mixing_angle, phase_deviation, predict_component_phase, predict_double_arp_amplitude,
    AngleBranch,
};
use rydpass::forster::{
    distance_sensitivity, run_double_passage, ForsterScenario, SensitivityTable, FORSTER_STEPS_PER_US,
};
use rydpass::gates::{
    forster_cz, pi_pulse_error, pi_pulse_error_dynamical, pi_pulse_vs_adiabatic_error, ExcitationBranch,
};
use rydpass::parallel::{self, Execution};
use rydpass::propagator::{eigen_track_at, EigenTrack, ExcitationSettings, Protocol};
use rydpass::pulses::{GaussianChirpPulse, ThreeLevelDrive, TwoLevelDrive, TwoLevelPulse, Window};
use rydpass::units::{mhz, to_mhz, wrap_phase};

use crate::config::{
    DoubleModeSpec, DoubleSpec, ForsterSpec, GridSpec, InitialSpec, ModelKindSpec, ModelSpec, OutputSpec, PulseSpec,
    RepresentationSpec, ScenarioConfig,
};
use crate::error::{Result, RunnerError};
use crate::output::{eigenvalue_csv, table_csv, trajectory_csv, Artifact};
use crate::poisson::{poisson_stats, PoissonLoadingSpec, PoissonTable};
use crate::scenario::{run_scenario, stirap_pulse, two_level_pulse, ScenarioRun};

pub const PRESET_NAMES: [&str; 12] = [
    "fig2", "fig3a", "fig3b", "fig3c", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig12",
];

/// Dressed-state comparisons only count samples with a margin below this.
pub const DRESSED_MARGIN_LIMIT: f64 = 0.05;
/// Phase comparisons only count samples with more population than this.
pub const PHASE_POPULATION_FLOOR: f64 = 1e-3;
/// Relative distance changes of the Förster sensitivity sweep.
pub const DISTANCE_CHANGES: [f64; 3] = [-0.1, 0.0, 0.1];
/// Ensemble sizes whose loading probability is tabulated.
pub const LOADING_MEAN_ATOMS: f64 = 5.0;
/// Sizes for which the π-pulse and adiabatic errors are compared.
pub const LOADING_SIZES: std::ops::RangeInclusive<usize> = 1..=10;
/// Step density for the square π pulse; it must resolve the closed form to
/// round-off.
const PI_PULSE_STEPS_PER_US: f64 = 1e6;
/// Step density for drives detuned by hundreds of MHz.
const FAST_STEPS_PER_US: f64 = 5e4;
/// Step density for the nonlinear sweeps, which reach several hundred MHz.
const SWEEP_STEPS_PER_US: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PresetOptions {
    /// Replaces every preset's own step density.
    pub steps_per_us: Option<f64>,
    pub execution: Execution,
}

impl PresetOptions {
    fn steps(&self, default: f64) -> f64 {
        self.steps_per_us.unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetOutput<S> {
    pub summary: S,
    pub artifacts: Vec<Artifact>,
}

impl<S: Serialize> PresetOutput<S> {
    fn finish(name: &str, summary: S, mut artifacts: Vec<Artifact>) -> Result<Self> {
        artifacts.push(Artifact::json(format!("{name}_summary.json"), &summary)?);
        Ok(Self { summary, artifacts })
    }
}

/// Runs a preset by name and returns its files; the summary JSON is the
/// last artifact.
pub fn run_preset(name: &str, options: &PresetOptions) -> Result<Vec<Artifact>> {
    Ok(match name {
        "fig2" => fig2(options)?.artifacts,
        "fig3a" => fig3a(options)?.artifacts,
        "fig3b" => fig3b(options)?.artifacts,
        "fig3c" => fig3c(options)?.artifacts,
        "fig4" => fig4(options)?.artifacts,
        "fig5" => fig5(options)?.artifacts,
        "fig6" => fig6(options)?.artifacts,
        "fig7" => fig7(options)?.artifacts,
        "fig8" => fig8(options)?.artifacts,
        "fig9" => fig9(options)?.artifacts,
        "fig10" => fig10(options)?.artifacts,
        "fig12" => fig12(options)?.artifacts,
        other => return Err(RunnerError::UnknownPreset { name: other.into() }),
    })
}

// Scenario builders. These are the single-run configurations behind the
// presets; `preset_config` exposes one representative per figure so a
// preset can be edited or swept as a file.

fn scenario(name: String, kind: ModelKindSpec, atoms: usize, pulse: PulseSpec, steps_per_us: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: Some(name),
        model: ModelSpec {
            kind,
            atoms,
            representation: RepresentationSpec::Symmetric,
        },
        pulse,
        double: None,
        forster: None,
        grid: GridSpec {
            steps_per_us,
            ..GridSpec::default()
        },
        initial: InitialSpec::default(),
        outputs: OutputSpec::default(),
    }
}

fn with_window(mut config: ScenarioConfig, start: f64, end: f64) -> ScenarioConfig {
    config.grid.start_us = Some(start);
    config.grid.end_us = Some(end);
    config
}

fn with_eigenvalues(mut config: ScenarioConfig) -> ScenarioConfig {
    config.outputs.eigenvalues = true;
    config
}

/// Single-atom chirped passage: 5 MHz peak, 1 µs width, −1 MHz/µs chirp.
pub fn fig2_config(steps_per_us: f64) -> ScenarioConfig {
    let pulse = PulseSpec::GaussianChirp {
        peak_rabi_mhz: 5.0,
        width_us: 1.0,
        center_us: 0.0,
        chirp_mhz_per_us: -1.0,
        negative_field: false,
    };
    scenario("fig2".into(), ModelKindSpec::Arp, 1, pulse, steps_per_us)
}

fn ensemble_arp_pulse() -> PulseSpec {
    PulseSpec::GaussianChirp {
        peak_rabi_mhz: 2.0,
        width_us: 1.0,
        center_us: 0.0,
        chirp_mhz_per_us: 1.0,
        negative_field: false,
    }
}

/// Blockaded two-level ensemble: 2 MHz peak, 1 MHz/µs chirp.
pub fn fig3a_config(atoms: usize, steps_per_us: f64) -> ScenarioConfig {
    scenario(
        format!("fig3a_n{atoms}"),
        ModelKindSpec::EnsembleTwoLevel,
        atoms,
        ensemble_arp_pulse(),
        steps_per_us,
    )
}

/// Gaussian pair with the Stokes pulse at −1 µs and the pump at +1 µs.
pub fn stirap_config(
    name: String,
    atoms: usize,
    pump_mhz: f64,
    stokes_mhz: f64,
    detuning_mhz: f64,
    steps_per_us: f64,
) -> ScenarioConfig {
    let pulse = PulseSpec::StirapGaussian {
        stokes_peak_mhz: stokes_mhz,
        pump_peak_mhz: pump_mhz,
        stokes_center_us: -1.0,
        pump_center_us: 1.0,
        width_us: 1.0,
        detuning_mhz,
        sign_switched: false,
    };
    scenario(name, ModelKindSpec::EnsembleThreeLevel, atoms, pulse, steps_per_us)
}

/// The two published amplitude assignments `(pump, stokes)` for the
/// Gaussian pair, in MHz. Both are run.
pub const STIRAP_ORDERINGS: [(f64, f64); 2] = [(30.0, 40.0), (40.0, 30.0)];

fn ordering_label(pump: f64, stokes: f64) -> String {
    format!("p{pump}_s{stokes}")
}

pub fn fig4_config(detuning_mhz: f64, steps_per_us: f64) -> ScenarioConfig {
    stirap_config(
        format!("fig4_d{detuning_mhz}"),
        2,
        10.0,
        10.0,
        detuning_mhz,
        steps_per_us,
    )
}

/// Hypergaussian pair on `[0, 8]` µs: 50 MHz, `T0 = 2 µs`, order 3,
/// steepness 4, detuned by 200 MHz.
pub fn fig6_optimized_config(atoms: usize, steps_per_us: f64) -> ScenarioConfig {
    let pulse = PulseSpec::StirapOptimized {
        amplitude_mhz: 50.0,
        hyper_width_us: 2.0,
        hyper_order: 3,
        steepness: 4.0,
        center_us: 4.0,
        detuning_mhz: 200.0,
    };
    let c = scenario(
        format!("fig6_opt_n{atoms}"),
        ModelKindSpec::EnsembleThreeLevel,
        atoms,
        pulse,
        steps_per_us,
    );
    with_window(c, 0.0, 8.0)
}

pub fn fig6_gaussian_config(atoms: usize, steps_per_us: f64) -> ScenarioConfig {
    stirap_config(format!("fig6_gauss_n{atoms}"), atoms, 50.0, 50.0, 200.0, steps_per_us)
}

/// Half-duration of one truncated 1 µs Gaussian.
fn gaussian_half_window() -> f64 {
    GaussianChirpPulse::new(1.0, 1.0, 0.0, 0.0)
        .expect("unit width is valid")
        .support()
        .end
}

/// Two back-to-back copies of the single-atom chirped passage on `[0, 4T]`.
pub fn fig7_config(mode: DoubleModeSpec, steps_per_us: f64) -> ScenarioConfig {
    let half = gaussian_half_window();
    let mut c = fig2_config(steps_per_us);
    c.name = Some(format!("fig7_{}", mode_label(mode)));
    if let PulseSpec::GaussianChirp { center_us, .. } = &mut c.pulse {
        *center_us = half;
    }
    c.double = Some(DoubleSpec {
        mode,
        delay_us: Some(2.0 * half),
        mirror_about_us: None,
    });
    with_window(c, 0.0, 4.0 * half)
}

fn mode_label(mode: DoubleModeSpec) -> &'static str {
    match mode {
        DoubleModeSpec::Identical => "identical",
        DoubleModeSpec::PhaseFlipped => "phase_flipped",
        DoubleModeSpec::DetuningSignSwitched => "detuning_switched",
    }
}

fn switch_label(sign_switched: bool) -> &'static str {
    if sign_switched {
        "switched"
    } else {
        "constant"
    }
}

/// Pair followed by its mirror image about `t = 0`, on `[-10, 10]` µs.
fn double_stirap(
    name: String,
    atoms: usize,
    pump: (f64, f64),
    stokes: (f64, f64),
    detuning_mhz: f64,
    sign_switched: bool,
    steps_per_us: f64,
) -> ScenarioConfig {
    let pulse = PulseSpec::StirapGaussian {
        stokes_peak_mhz: stokes.0,
        pump_peak_mhz: pump.0,
        stokes_center_us: stokes.1,
        pump_center_us: pump.1,
        width_us: 1.0,
        detuning_mhz,
        sign_switched,
    };
    let mut c = scenario(name, ModelKindSpec::EnsembleThreeLevel, atoms, pulse, steps_per_us);
    c.double = Some(DoubleSpec {
        mode: DoubleModeSpec::Identical,
        delay_us: None,
        mirror_about_us: Some(0.0),
    });
    with_eigenvalues(with_window(c, -10.0, 10.0))
}

/// Two-atom double STIRAP: 10 MHz pulses, Stokes at ±4 µs, pump at ±6 µs,
/// detuning 10 MHz (constant or `·sgn(t)`).
pub fn fig8_config(sign_switched: bool, steps_per_us: f64) -> ScenarioConfig {
    double_stirap(
        format!("fig8_{}", switch_label(sign_switched)),
        2,
        (10.0, -6.0),
        (10.0, -4.0),
        10.0,
        sign_switched,
        steps_per_us,
    )
}

/// Ensemble double STIRAP: the 40/30 MHz pair shifted to −5 µs and
/// mirrored, detuning 200 MHz.
pub fn fig9_config(atoms: usize, sign_switched: bool, steps_per_us: f64) -> ScenarioConfig {
    double_stirap(
        format!("fig9_{}_n{atoms}", switch_label(sign_switched)),
        atoms,
        (40.0, -4.0),
        (30.0, -6.0),
        200.0,
        sign_switched,
        steps_per_us,
    )
}

/// Ensemble double chirped passage with the second field inverted.
pub fn fig9_arp_config(atoms: usize, steps_per_us: f64) -> ScenarioConfig {
    let half = gaussian_half_window();
    let mut pulse = ensemble_arp_pulse();
    if let PulseSpec::GaussianChirp { center_us, .. } = &mut pulse {
        *center_us = -half;
    }
    let mut c = scenario(
        format!("fig9_arp_n{atoms}"),
        ModelKindSpec::EnsembleTwoLevel,
        atoms,
        pulse,
        steps_per_us,
    );
    c.double = Some(DoubleSpec {
        mode: DoubleModeSpec::PhaseFlipped,
        delay_us: Some(2.0 * half),
        mirror_about_us: None,
    });
    with_window(c, -2.0 * half, 2.0 * half)
}

/// Double passage with linearly chirped 10 MHz Gaussians of width 0.12 µs
/// centered at 0.5 and 1.5 µs, chirp −100 MHz/µs.
pub fn fig10_left_config(steps_per_us: f64) -> ScenarioConfig {
    let pulse = PulseSpec::GaussianChirp {
        peak_rabi_mhz: 10.0,
        width_us: 0.12,
        center_us: 0.5,
        chirp_mhz_per_us: -100.0,
        negative_field: false,
    };
    let mut c = scenario("fig10_left".into(), ModelKindSpec::Arp, 1, pulse, steps_per_us);
    c.double = Some(DoubleSpec {
        mode: DoubleModeSpec::Identical,
        delay_us: Some(1.0),
        mirror_about_us: None,
    });
    with_window(c, 0.0, 2.0)
}

/// Constant 2.1 MHz drive with a cubic sweep `s1·x + s2·x³` about 0.5 and
/// 1.5 µs, `s1 = −10 MHz/µs`, `s2 = −2000 MHz/µs³`.
pub fn fig10_right_config(steps_per_us: f64) -> ScenarioConfig {
    let pulse = PulseSpec::Nonlinear {
        rabi_mhz: 2.1,
        centers_us: vec![0.5, 1.5],
        slope_mhz_per_us: -10.0,
        odd_coeff_mhz: -2000.0,
        odd_power: 3,
        start_us: 0.0,
        end_us: 2.0,
    };
    scenario("fig10_right".into(), ModelKindSpec::Arp, 1, pulse, steps_per_us)
}

/// The Förster double passage as a plain scenario file.
pub fn fig12_config(steps_per_us: f64) -> Result<ScenarioConfig> {
    let s = ForsterScenario::fig12(mhz(rydpass::forster::DEFAULT_COUPLING_MHZ), steps_per_us)?;
    let wave = &s.channel.detuning_waveform;
    let pulse = PulseSpec::Nonlinear {
        rabi_mhz: 0.0,
        centers_us: wave.centers.clone(),
        slope_mhz_per_us: to_mhz(wave.slope),
        odd_coeff_mhz: to_mhz(wave.odd_coeff),
        odd_power: wave.odd_power.exponent() as u32,
        start_us: wave.window.start,
        end_us: wave.window.end,
    };
    let mut c = scenario("fig12".into(), ModelKindSpec::Forster, 1, pulse, steps_per_us);
    c.forster = Some(ForsterSpec {
        defect_mhz: to_mhz(s.channel.defect_at_zero_field),
        coupling_mhz: rydpass::forster::DEFAULT_COUPLING_MHZ,
        distance_um: s.channel.distance,
    });
    Ok(c)
}

/// A representative scenario file for a preset, where the figure is built
/// from single runs.
pub fn preset_config(name: &str, steps_per_us: Option<f64>) -> Result<ScenarioConfig> {
    let s = |d| steps_per_us.unwrap_or(d);
    Ok(match name {
        "fig2" => fig2_config(s(1e4)),
        "fig3a" => fig3a_config(2, s(1e4)),
        "fig3b" => stirap_config("fig3b".into(), 2, 30.0, 40.0, 0.0, s(1e4)),
        "fig3c" => stirap_config("fig3c".into(), 2, 30.0, 40.0, 200.0, s(FAST_STEPS_PER_US)),
        "fig4" => fig4_config(10.0, s(1e4)),
        "fig5" => stirap_config("fig5_stirap".into(), 5, 50.0, 50.0, 200.0, s(FAST_STEPS_PER_US)),
        "fig6" => fig6_optimized_config(5, s(FAST_STEPS_PER_US)),
        "fig7" => fig7_config(DoubleModeSpec::Identical, s(1e4)),
        "fig8" => fig8_config(true, s(1e4)),
        "fig9" => fig9_config(7, true, s(FAST_STEPS_PER_US)),
        "fig10" => fig10_right_config(s(SWEEP_STEPS_PER_US)),
        "fig12" => fig12_config(s(FORSTER_STEPS_PER_US))?,
        other => return Err(RunnerError::UnknownPreset { name: other.into() }),
    })
}

fn run_all(configs: &[ScenarioConfig], execution: Execution) -> Result<Vec<ScenarioRun>> {
    parallel::map(execution, configs, run_scenario).into_iter().collect()
}

fn trajectory_artifact(run: &ScenarioRun, extra: &[(String, Vec<f64>)]) -> Artifact {
    Artifact::new(
        format!("{}.csv", run.name),
        trajectory_csv(&run.trajectory, &OutputSpec::default(), extra),
    )
}

fn track(run: &ScenarioRun) -> Result<EigenTrack> {
    match &run.track {
        Some(t) => Ok(t.clone()),
        None => Ok(eigen_track_at(&run.model, &run.trajectory.times, &run.initial)?),
    }
}

fn unwrap(wrapped: &[f64]) -> Vec<f64> {
    use std::f64::consts::TAU;
    let mut out: Vec<f64> = Vec::with_capacity(wrapped.len());
    for &w in wrapped {
        let value = match out.last() {
            None => w,
            Some(&prev) => w + TAU * ((prev - w) / TAU).round(),
        };
        out.push(value);
    }
    out
}

// ---- fig2 ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Summary {
    pub final_excited_population: f64,
    /// Largest |numeric − dressed| amplitude modulus over samples whose
    /// margin is below [`DRESSED_MARGIN_LIMIT`].
    pub dressed_max_deviation: f64,
    pub dressed_samples: usize,
    pub max_margin: f64,
    pub max_norm_drift: f64,
}

pub fn fig2(options: &PresetOptions) -> Result<PresetOutput<Fig2Summary>> {
    let config = fig2_config(options.steps(1e4));
    let run = run_scenario(&config)?;
    let pulse = two_level_pulse(&config)?;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    let mut dressed = [Vec::new(), Vec::new()];
    for (t, amps) in run.trajectory.times.iter().zip(&run.trajectory.amplitudes) {
        let (rabi, detuning) = (pulse.rabi(*t), pulse.detuning(*t));
        let theta = mixing_angle(rabi, detuning, AngleBranch::for_rabi(rabi))?;
        let [c1, c2] = lower_dressed_prediction(theta, Complex64::new(1.0, 0.0));
        dressed[0].push(c1.norm_sqr());
        dressed[1].push(c2.norm_sqr());
        let margin = pulse.rabi_rate(*t).abs().max(pulse.detuning_rate(*t).abs()) / (rabi * rabi + detuning * detuning);
        if margin < DRESSED_MARGIN_LIMIT {
            samples += 1;
            worst = worst
                .max((amps[0].norm() - c1.norm()).abs())
                .max((amps[1].norm() - c2.norm()).abs());
        }
    }
    let report = run.report();
    let summary = Fig2Summary {
        final_excited_population: report.final_populations[1],
        dressed_max_deviation: worst,
        dressed_samples: samples,
        max_margin: report.max_adiabaticity_margin.unwrap_or(f64::NAN),
        max_norm_drift: report.max_norm_drift,
    };
    let [dg, dr] = dressed;
    let artifacts = vec![trajectory_artifact(
        &run,
        &[("P_g_dressed".into(), dg), ("P_r_dressed".into(), dr)],
    )];
    PresetOutput::finish("fig2", summary, artifacts)
}

// ---- fig3 ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationRow {
    pub atoms: usize,
    /// `None` for the chirped passage.
    pub ordering: Option<String>,
    pub single_rydberg_population: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3aSummary {
    pub rows: Vec<ExcitationRow>,
    /// Largest difference of `P₁` between any two ensemble sizes.
    pub spread: f64,
}

fn excitation_rows(runs: &[ScenarioRun], orderings: &[Option<String>]) -> Vec<ExcitationRow> {
    runs.iter()
        .zip(orderings)
        .map(|(run, ordering)| {
            let p1 = run.single_rydberg_population().unwrap_or(0.0);
            ExcitationRow {
                atoms: run.model.n_atoms(),
                ordering: ordering.clone(),
                single_rydberg_population: p1,
                error: 1.0 - p1,
            }
        })
        .collect()
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    max - min
}

pub fn fig3a(options: &PresetOptions) -> Result<PresetOutput<Fig3aSummary>> {
    let configs: Vec<_> = (1..=3).map(|n| fig3a_config(n, options.steps(1e4))).collect();
    let runs = run_all(&configs, options.execution)?;
    let rows = excitation_rows(&runs, &[None, None, None]);
    let summary = Fig3aSummary {
        spread: spread(rows.iter().map(|r| r.single_rydberg_population)),
        rows,
    };
    let artifacts = runs.iter().map(|r| trajectory_artifact(r, &[])).collect();
    PresetOutput::finish("fig3a", summary, artifacts)
}

fn stirap_orderings(prefix: &str, detuning_mhz: f64, steps: f64) -> (Vec<ScenarioConfig>, Vec<Option<String>>) {
    STIRAP_ORDERINGS
        .iter()
        .flat_map(|&(pump, stokes)| {
            (1..=3).map(move |n| {
                let label = ordering_label(pump, stokes);
                (
                    stirap_config(format!("{prefix}_{label}_n{n}"), n, pump, stokes, detuning_mhz, steps),
                    Some(label),
                )
            })
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroBranch {
    pub ordering: String,
    pub atoms: usize,
    /// Branch with `|λ| ≤ 10⁻¹⁰·‖H‖` throughout, if any.
    pub branch: Option<usize>,
    /// `max_t |λ(t)|/‖H(t)‖` on that branch.
    pub max_relative_eigenvalue: Option<f64>,
}

/// Relative tolerance for an eigenvalue to count as identically zero.
pub const ZERO_BRANCH_TOLERANCE: f64 = 1e-10;

fn zero_branch(track: &EigenTrack, ordering: String, atoms: usize) -> ZeroBranch {
    let branch = track.zero_branch(ZERO_BRANCH_TOLERANCE);
    let max_relative_eigenvalue = branch.map(|k| {
        track
            .trace(k)
            .iter()
            .zip(&track.spectral_norms)
            .filter(|(_, &n)| n > 0.0)
            .map(|(e, n)| e.abs() / n)
            .fold(0.0, f64::max)
    });
    ZeroBranch {
        ordering,
        atoms,
        branch,
        max_relative_eigenvalue,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3bSummary {
    pub rows: Vec<ExcitationRow>,
    /// Two-atom spectrum check, one entry per ordering.
    pub zero_branches: Vec<ZeroBranch>,
}

pub fn fig3b(options: &PresetOptions) -> Result<PresetOutput<Fig3bSummary>> {
    let (mut configs, orderings) = stirap_orderings("fig3b", 0.0, options.steps(1e4));
    for c in configs.iter_mut().filter(|c| c.model.atoms == 2) {
        c.outputs.eigenvalues = true;
    }
    let runs = run_all(&configs, options.execution)?;
    let mut artifacts: Vec<Artifact> = runs.iter().map(|r| trajectory_artifact(r, &[])).collect();
    let mut zero_branches = Vec::new();
    for (run, ordering) in runs.iter().zip(&orderings) {
        if let Some(track) = &run.track {
            artifacts.push(Artifact::new(
                format!("{}_eigenvalues.csv", run.name),
                eigenvalue_csv(track),
            ));
            zero_branches.push(zero_branch(
                track,
                ordering.clone().unwrap_or_default(),
                run.model.n_atoms(),
            ));
        }
    }
    let summary = Fig3bSummary {
        rows: excitation_rows(&runs, &orderings),
        zero_branches,
    };
    PresetOutput::finish("fig3b", summary, artifacts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3cSummary {
    pub rows: Vec<ExcitationRow>,
    /// `P₁` spread over ensemble sizes, per ordering.
    pub spreads: Vec<(String, f64)>,
}

pub fn fig3c(options: &PresetOptions) -> Result<PresetOutput<Fig3cSummary>> {
    let (configs, orderings) = stirap_orderings("fig3c", 200.0, options.steps(FAST_STEPS_PER_US));
    let runs = run_all(&configs, options.execution)?;
    let rows = excitation_rows(&runs, &orderings);
    let spreads = STIRAP_ORDERINGS
        .iter()
        .map(|&(p, s)| {
            let label = ordering_label(p, s);
            let values = rows
                .iter()
                .filter(|r| r.ordering.as_deref() == Some(label.as_str()))
                .map(|r| r.single_rydberg_population);
            (label.clone(), spread(values.collect::<Vec<_>>().into_iter()))
        })
        .collect();
    let artifacts = runs.iter().map(|r| trajectory_artifact(r, &[])).collect();
    PresetOutput::finish("fig3c", Fig3cSummary { rows, spreads }, artifacts)
}

// ---- fig4 ------------------------------------------------------------------

pub const FIG4_DETUNINGS_MHZ: [f64; 4] = [0.0, 4.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningRow {
    pub detuning_mhz: f64,
    pub single_rydberg_population: f64,
    pub ground_population: f64,
    pub has_zero_branch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Summary {
    pub rows: Vec<DetuningRow>,
}

impl Fig4Summary {
    pub fn at(&self, detuning_mhz: f64) -> Option<&DetuningRow> {
        self.rows.iter().find(|r| r.detuning_mhz == detuning_mhz)
    }
}

pub fn fig4(options: &PresetOptions) -> Result<PresetOutput<Fig4Summary>> {
    let configs: Vec<_> = FIG4_DETUNINGS_MHZ
        .iter()
        .map(|&d| with_eigenvalues(fig4_config(d, options.steps(1e4))))
        .collect();
    let runs = run_all(&configs, options.execution)?;
    let mut artifacts = Vec::new();
    let mut rows = Vec::new();
    for (run, &d) in runs.iter().zip(&FIG4_DETUNINGS_MHZ) {
        let track = track(run)?;
        artifacts.push(trajectory_artifact(run, &[]));
        artifacts.push(Artifact::new(
            format!("{}_eigenvalues.csv", run.name),
            eigenvalue_csv(&track),
        ));
        rows.push(DetuningRow {
            detuning_mhz: d,
            single_rydberg_population: run.single_rydberg_population().unwrap_or(0.0),
            ground_population: run.trajectory.final_populations()[0],
            has_zero_branch: track.zero_branch(ZERO_BRANCH_TOLERANCE).is_some(),
        });
    }
    PresetOutput::finish("fig4", Fig4Summary { rows }, artifacts)
}

// ---- fig5 ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadingErrorRow {
    pub atoms: usize,
    pub loading_probability: f64,
    pub pi_pulse_error: f64,
    pub pi_pulse_error_dynamical: f64,
    pub arp_error: f64,
    pub stirap_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig5Summary {
    pub loading: PoissonTable,
    /// Ensemble size the π pulse area is chosen for.
    pub optimized_for: usize,
    pub rows: Vec<LoadingErrorRow>,
    /// Largest |dynamical − closed form| π-pulse error.
    pub max_dynamical_mismatch: f64,
}

pub fn fig5(options: &PresetOptions) -> Result<PresetOutput<Fig5Summary>> {
    let n_opt = LOADING_MEAN_ATOMS as usize;
    let max_atoms = *LOADING_SIZES.end();
    let loading = poisson_stats(&PoissonLoadingSpec {
        mean_atoms: LOADING_MEAN_ATOMS,
        max_atoms,
    })?;
    let arp_config = fig3a_config(1, options.steps(1e4));
    let stirap = stirap_config(
        "fig5_stirap".into(),
        1,
        50.0,
        50.0,
        200.0,
        options.steps(FAST_STEPS_PER_US),
    );
    let arp = Protocol::Arp(two_level_pulse(&arp_config)?);
    let stirap_protocol = Protocol::Stirap(stirap_pulse(&stirap)?);
    let arp_settings = ExcitationSettings {
        steps_per_us: arp_config.grid.steps_per_us,
        ..ExcitationSettings::default()
    };
    let stirap_settings = ExcitationSettings {
        steps_per_us: stirap.grid.steps_per_us,
        ..ExcitationSettings::default()
    };
    let sizes: Vec<usize> = LOADING_SIZES.collect();
    let pi_steps = options.steps(PI_PULSE_STEPS_PER_US);
    let rows = parallel::map(options.execution, &sizes, |&n| -> Result<LoadingErrorRow> {
        Ok(LoadingErrorRow {
            atoms: n,
            loading_probability: loading.probabilities[n],
            pi_pulse_error: pi_pulse_error(n, n_opt),
            pi_pulse_error_dynamical: pi_pulse_error_dynamical(n, n_opt, mhz(1.0), pi_steps)?,
            arp_error: pi_pulse_vs_adiabatic_error(n, n_opt, &ExcitationBranch::Adiabatic(arp.clone()), &arp_settings)?,
            stirap_error: pi_pulse_vs_adiabatic_error(
                n,
                n_opt,
                &ExcitationBranch::Adiabatic(stirap_protocol.clone()),
                &stirap_settings,
            )?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_dynamical_mismatch = rows
        .iter()
        .map(|r| (r.pi_pulse_error_dynamical - r.pi_pulse_error).abs())
        .fold(0.0, f64::max);
    let loading_csv = table_csv(
        &["atoms".into(), "probability".into()],
        &loading
            .probabilities
            .iter()
            .enumerate()
            .map(|(n, &p)| vec![n as f64, p])
            .collect::<Vec<_>>(),
    );
    let error_csv = table_csv(
        &[
            "atoms",
            "loading_probability",
            "pi_pulse",
            "pi_pulse_dynamical",
            "arp",
            "stirap",
        ]
        .map(String::from),
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.atoms as f64,
                    r.loading_probability,
                    r.pi_pulse_error,
                    r.pi_pulse_error_dynamical,
                    r.arp_error,
                    r.stirap_error,
                ]
            })
            .collect::<Vec<_>>(),
    );
    let summary = Fig5Summary {
        loading,
        optimized_for: n_opt,
        rows,
        max_dynamical_mismatch,
    };
    let artifacts = vec![
        Artifact::new("fig5_loading.csv", loading_csv),
        Artifact::new("fig5_errors.csv", error_csv),
    ];
    PresetOutput::finish("fig5", summary, artifacts)
}

// ---- fig6 ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparisonRow {
    pub atoms: usize,
    pub optimized_error: f64,
    pub gaussian_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig6Summary {
    pub rows: Vec<PairComparisonRow>,
}

pub fn fig6(options: &PresetOptions) -> Result<PresetOutput<Fig6Summary>> {
    let steps = options.steps(FAST_STEPS_PER_US);
    let configs: Vec<_> = (1..=5)
        .flat_map(|n| [fig6_optimized_config(n, steps), fig6_gaussian_config(n, steps)])
        .collect();
    let runs = run_all(&configs, options.execution)?;
    let errors: Vec<f64> = runs
        .iter()
        .map(|r| 1.0 - r.single_rydberg_population().unwrap_or(0.0))
        .collect();
    let rows: Vec<PairComparisonRow> = errors
        .chunks(2)
        .enumerate()
        .map(|(i, e)| PairComparisonRow {
            atoms: i + 1,
            optimized_error: e[0],
            gaussian_error: e[1],
        })
        .collect();
    let pair = stirap_pulse(&configs[0])?;
    let shape_rows: Vec<Vec<f64>> = (0..=800)
        .map(|i| {
            let t = i as f64 * 0.01;
            vec![t, to_mhz(pair.pump(t)), to_mhz(pair.stokes(t))]
        })
        .collect();
    let artifacts = vec![
        Artifact::new(
            "fig6_shapes.csv",
            table_csv(&["t", "pump_mhz", "stokes_mhz"].map(String::from), &shape_rows),
        ),
        Artifact::new(
            "fig6_errors.csv",
            table_csv(
                &["atoms", "optimized", "gaussian"].map(String::from),
                &rows
                    .iter()
                    .map(|r| vec![r.atoms as f64, r.optimized_error, r.gaussian_error])
                    .collect::<Vec<_>>(),
            ),
        ),
    ];
    PresetOutput::finish("fig6", Fig6Summary { rows }, artifacts)
}

// ---- fig7 ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublePassageRun {
    pub label: String,
    pub final_population: f64,
    /// Final phase of the initial state, wrapped to `(-π, π]`.
    pub final_phase: f64,
    pub predicted_phase: f64,
    pub max_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig7Summary {
    pub runs: Vec<DoublePassageRun>,
}

impl Fig7Summary {
    pub fn get(&self, label: &str) -> Option<&DoublePassageRun> {
        self.runs.iter().find(|r| r.label == label)
    }
}

pub fn fig7(options: &PresetOptions) -> Result<PresetOutput<Fig7Summary>> {
    let modes = [DoubleModeSpec::Identical, DoubleModeSpec::PhaseFlipped];
    let configs: Vec<_> = modes.iter().map(|&m| fig7_config(m, options.steps(1e4))).collect();
    let runs = run_all(&configs, options.execution)?;
    let mut summaries = Vec::new();
    for ((run, config), mode) in runs.iter().zip(&configs).zip(modes) {
        let pulse = match two_level_pulse(config)? {
            TwoLevelPulse::Double(seq) => *seq,
            _ => unreachable!("fig7 scenarios are double sequences"),
        };
        let window = Window::new(run.grid.t_start, run.grid.t_end)?;
        let prediction = predict_double_arp_amplitude(&pulse, window, 1)?;
        let amp = run.trajectory.final_amplitudes()[0];
        summaries.push(DoublePassageRun {
            label: mode_label(mode).into(),
            final_population: amp.norm_sqr(),
            final_phase: wrap_phase(amp.arg()),
            predicted_phase: wrap_phase(prediction.amplitude.arg()),
            max_margin: prediction.max_margin,
        });
    }
    let artifacts = runs.iter().map(|r| trajectory_artifact(r, &[])).collect();
    PresetOutput::finish("fig7", Fig7Summary { runs: summaries }, artifacts)
}

// ---- fig8 / fig9 -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTrackingRun {
    pub label: String,
    pub atoms: usize,
    pub sign_switched: bool,
    pub final_ground_population: f64,
    /// Final phase of the collective ground state, wrapped to `(-π, π]`.
    pub final_phase: f64,
    /// Adiabatic prediction from the tracked eigenvalue and eigenvector.
    pub predicted_phase: f64,
    /// Largest |numeric − predicted| phase where the ground population
    /// exceeds [`PHASE_POPULATION_FLOOR`].
    pub max_phase_deviation: Option<f64>,
    pub min_ground_population: f64,
}

fn phase_tracking(run: &ScenarioRun, sign_switched: bool) -> Result<(PhaseTrackingRun, Vec<Artifact>)> {
    let track = track(run)?;
    let predicted = predict_component_phase(&track, &run.initial, 0);
    let deviation = phase_deviation(&run.trajectory, &track, &run.initial, 0, PHASE_POPULATION_FLOOR);
    let amp = run.trajectory.final_amplitudes()[0];
    let ground = run.trajectory.population(0);
    let summary = PhaseTrackingRun {
        label: run.name.clone(),
        atoms: run.model.n_atoms(),
        sign_switched,
        final_ground_population: amp.norm_sqr(),
        final_phase: wrap_phase(amp.arg()),
        predicted_phase: predicted.last().copied().unwrap_or(0.0),
        max_phase_deviation: deviation,
        min_ground_population: ground.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let label = &run.trajectory.labels[0];
    let extra = [
        (format!("phase_predicted_{label}"), unwrap(&predicted)),
        ("E_initial".to_string(), track.initial_branch()),
    ];
    let artifacts = vec![
        trajectory_artifact(run, &extra),
        Artifact::new(format!("{}_eigenvalues.csv", run.name), eigenvalue_csv(&track)),
    ];
    Ok((summary, artifacts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig8Summary {
    pub runs: Vec<PhaseTrackingRun>,
}

pub fn fig8(options: &PresetOptions) -> Result<PresetOutput<Fig8Summary>> {
    let switches = [false, true];
    let configs: Vec<_> = switches.iter().map(|&s| fig8_config(s, options.steps(1e4))).collect();
    let runs = run_all(&configs, options.execution)?;
    let mut summaries = Vec::new();
    let mut artifacts = Vec::new();
    for (run, &s) in runs.iter().zip(&switches) {
        let (summary, files) = phase_tracking(run, s)?;
        summaries.push(summary);
        artifacts.extend(files);
    }
    PresetOutput::finish("fig8", Fig8Summary { runs: summaries }, artifacts)
}

pub const FIG9_SIZES: [usize; 3] = [1, 2, 7];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseInvertedArpRun {
    pub atoms: usize,
    pub final_ground_population: f64,
    pub final_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig9Summary {
    pub stirap: Vec<PhaseTrackingRun>,
    pub arp_phase_inverted: Vec<PhaseInvertedArpRun>,
}

pub fn fig9(options: &PresetOptions) -> Result<PresetOutput<Fig9Summary>> {
    let steps = options.steps(FAST_STEPS_PER_US);
    let cases: Vec<(usize, bool)> = [false, true]
        .iter()
        .flat_map(|&s| FIG9_SIZES.iter().map(move |&n| (n, s)))
        .collect();
    let configs: Vec<_> = cases.iter().map(|&(n, s)| fig9_config(n, s, steps)).collect();
    let tracked = parallel::map(options.execution, &configs, |c| -> Result<_> {
        let run = run_scenario(c)?;
        let switched = matches!(
            c.pulse,
            PulseSpec::StirapGaussian {
                sign_switched: true,
                ..
            }
        );
        phase_tracking(&run, switched)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let arp_configs: Vec<_> = FIG9_SIZES
        .iter()
        .map(|&n| fig9_arp_config(n, options.steps(1e4)))
        .collect();
    let arp_runs = run_all(&arp_configs, options.execution)?;
    let mut artifacts = Vec::new();
    let mut stirap = Vec::new();
    for (summary, files) in tracked {
        stirap.push(summary);
        artifacts.extend(files);
    }
    let arp_phase_inverted = arp_runs
        .iter()
        .map(|r| {
            let amp = r.trajectory.final_amplitudes()[0];
            PhaseInvertedArpRun {
                atoms: r.model.n_atoms(),
                final_ground_population: amp.norm_sqr(),
                final_phase: wrap_phase(amp.arg()),
            }
        })
        .collect();
    artifacts.extend(arp_runs.iter().map(|r| trajectory_artifact(r, &[])));
    PresetOutput::finish(
        "fig9",
        Fig9Summary {
            stirap,
            arp_phase_inverted,
        },
        artifacts,
    )
}

// ---- fig10 -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearPassageRun {
    pub label: String,
    pub population_error: f64,
    pub final_phase: f64,
    /// `|phase − π|` on the circle.
    pub phase_offset: f64,
    pub max_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig10Summary {
    pub runs: Vec<NonlinearPassageRun>,
}

pub fn fig10(options: &PresetOptions) -> Result<PresetOutput<Fig10Summary>> {
    let steps = options.steps(SWEEP_STEPS_PER_US);
    let configs = [fig10_left_config(steps), fig10_right_config(steps)];
    let runs = run_all(&configs, options.execution)?;
    let summaries = runs
        .iter()
        .map(|run| {
            let amp = run.trajectory.final_amplitudes()[0];
            let phase = wrap_phase(amp.arg());
            NonlinearPassageRun {
                label: run.name.trim_start_matches("fig10_").into(),
                population_error: 1.0 - amp.norm_sqr(),
                final_phase: phase,
                phase_offset: wrap_phase(phase - std::f64::consts::PI).abs(),
                max_margin: run.report().max_adiabaticity_margin.unwrap_or(f64::NAN),
            }
        })
        .collect();
    let artifacts = runs.iter().map(|r| trajectory_artifact(r, &[])).collect();
    PresetOutput::finish("fig10", Fig10Summary { runs: summaries }, artifacts)
}

// ---- fig12 -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForsterPassageSummary {
    pub coupling_mhz: f64,
    pub distance_um: f64,
    pub window_us: [f64; 2],
    pub population_error: f64,
    pub final_phase: f64,
    pub predicted_phase: f64,
    pub max_margin: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlledPhaseSummary {
    pub entangling_phase: f64,
    pub diagonal_phases: [f64; 4],
    pub fidelity: f64,
    pub low_confidence: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig12Summary {
    pub passage: ForsterPassageSummary,
    pub sensitivity: SensitivityTable,
    pub gate: ControlledPhaseSummary,
}

pub fn fig12(options: &PresetOptions) -> Result<PresetOutput<Fig12Summary>> {
    let scenario = ForsterScenario::fig12(
        mhz(rydpass::forster::DEFAULT_COUPLING_MHZ),
        options.steps(FORSTER_STEPS_PER_US),
    )?;
    let result = run_double_passage(&scenario)?;
    let sensitivity = distance_sensitivity(&scenario, &DISTANCE_CHANGES, options.execution)?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let report = forster_cz([zero, zero, zero, one], &scenario.channel, &scenario.grid)?;
    let diagnostics = report
        .controlled_phase
        .clone()
        .ok_or_else(|| RunnerError::Integration("controlled-phase diagnostics missing".into()))?;
    let window = scenario.window();
    let passage = ForsterPassageSummary {
        coupling_mhz: to_mhz(scenario.channel.coupling()),
        distance_um: scenario.channel.distance,
        window_us: [window.start, window.end],
        population_error: result.population_error,
        final_phase: wrap_phase(result.final_amplitude.arg()),
        predicted_phase: result.predicted_phase,
        max_margin: result.max_margin,
        flagged: result.flagged,
    };
    let defect: Vec<f64> = result
        .trajectory
        .times
        .iter()
        .map(|&t| to_mhz(scenario.channel.defect(t)))
        .collect();
    let sensitivity_csv = table_csv(
        &[
            "relative_change",
            "distance_um",
            "coupling_mhz",
            "phase",
            "phase_deviation",
            "population_error",
        ]
        .map(String::from),
        &sensitivity
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.relative_change,
                    r.distance,
                    to_mhz(r.coupling),
                    r.phase,
                    r.phase_deviation,
                    r.population_error,
                ]
            })
            .collect::<Vec<_>>(),
    );
    let artifacts = vec![
        Artifact::new(
            "fig12.csv",
            trajectory_csv(
                &result.trajectory,
                &OutputSpec::default(),
                &[("defect_mhz".into(), defect)],
            ),
        ),
        Artifact::new("fig12_sensitivity.csv", sensitivity_csv),
        Artifact::json("fig12_gate.json", &report)?,
    ];
    let summary = Fig12Summary {
        passage,
        sensitivity,
        gate: ControlledPhaseSummary {
            entangling_phase: diagnostics.entangling_phase,
            diagonal_phases: diagnostics.diagonal_phases,
            fidelity: report.fidelity,
            low_confidence: report.low_confidence,
            notes: report.notes.clone(),
        },
    };
    PresetOutput::finish("fig12", summary, artifacts)
}
