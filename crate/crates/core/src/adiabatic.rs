//! Adiabatic approximation: mixing angle, dressed states, generalized pulse
//! area and closed-form phase predictions.
//!
//! For the two-level matrix `(1/2)[[-δ, Ω₀], [Ω₀, δ]]` the dressed states are
//! `|I⟩ = cosθ|1⟩ - sinθ|2⟩` with energy `-Ω/2` and
//! `|II⟩ = sinθ|1⟩ + cosθ|2⟩` with energy `+Ω/2`, where `Ω = √(Ω₀² + δ²)`.

use num_complex::Complex64;
use thiserror::Error;

use crate::hamiltonians::HamiltonianModel;
use crate::propagator::{EigenTrack, TimeGrid, Trajectory};
use crate::pulses::{DoubleSequence, TwoLevelDrive, TwoLevelPulse, Window};
use crate::statespace::CollectiveState;
use crate::units::wrap_phase;

/// Margin above which a passage is not treated as adiabatic.
pub const ADIABATIC_MARGIN_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdiabaticError {
    #[error("mixing angle is undefined when both Rabi frequency and detuning vanish")]
    UndefinedAngle,
    #[error("adiabaticity margin requires a two-level model")]
    NotTwoLevel,
}

/// Which sign convention for `sinθ` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleBranch {
    /// `θ ∈ [0, π/2]`, for a nonnegative Rabi frequency.
    Standard,
    /// `θ ∈ [-π/2, 0]`, for a field of inverted sign.
    SignFlipped,
}

impl AngleBranch {
    /// Branch matching the sign of the Rabi frequency.
    pub fn for_rabi(rabi: f64) -> Self {
        if rabi < 0.0 {
            AngleBranch::SignFlipped
        } else {
            AngleBranch::Standard
        }
    }
}

/// Mixing angle with `sinθ = ±√((1 - δ/Ω)/2)`, `cosθ = √((1 + δ/Ω)/2)`.
pub fn mixing_angle(rabi: f64, detuning: f64, branch: AngleBranch) -> Result<f64, AdiabaticError> {
    let (sin, cos) = mixing_sin_cos(rabi, detuning, branch)?;
    Ok(sin.atan2(cos))
}

/// `(sinθ, cosθ)` evaluated in a cancellation-free form.
pub fn mixing_sin_cos(rabi: f64, detuning: f64, branch: AngleBranch) -> Result<(f64, f64), AdiabaticError> {
    let omega = rabi.hypot(detuning);
    if omega == 0.0 {
        return Err(AdiabaticError::UndefinedAngle);
    }
    let (sin, cos) = if detuning >= 0.0 {
        let cos = ((omega + detuning) / (2.0 * omega)).sqrt();
        (rabi.abs() / (2.0 * omega * cos), cos)
    } else {
        let sin = ((omega - detuning) / (2.0 * omega)).sqrt();
        (sin, rabi.abs() / (2.0 * omega * sin))
    };
    let sign = match branch {
        AngleBranch::Standard => 1.0,
        AngleBranch::SignFlipped => -1.0,
    };
    Ok((sign * sin, cos))
}

/// Bare amplitudes rotated into the dressed frame `c̃ = T(θ)·c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedDecomposition {
    pub mixing_angle: f64,
    pub dressed: [Complex64; 2],
    pub effective_rabi: f64,
}

impl DressedDecomposition {
    pub fn from_bare(
        amplitudes: [Complex64; 2],
        rabi: f64,
        detuning: f64,
        branch: AngleBranch,
    ) -> Result<Self, AdiabaticError> {
        let (s, c) = mixing_sin_cos(rabi, detuning, branch)?;
        let [c1, c2] = amplitudes;
        Ok(Self {
            mixing_angle: s.atan2(c),
            dressed: [c1 * c - c2 * s, c1 * s + c2 * c],
            effective_rabi: rabi.hypot(detuning),
        })
    }

    /// Inverse rotation `c = T(θ)ᵀ·c̃`.
    pub fn to_bare(&self) -> [Complex64; 2] {
        let (s, c) = self.mixing_angle.sin_cos();
        let [d1, d2] = self.dressed;
        [d1 * c + d2 * s, -d1 * s + d2 * c]
    }
}

/// Bare amplitudes predicted when only the lower dressed state is occupied.
pub fn lower_dressed_prediction(theta: f64, lower: Complex64) -> [Complex64; 2] {
    let (s, c) = theta.sin_cos();
    [lower * c, -lower * s]
}

/// Generalized area `S = ∫ √(Ω₀² + δ²) dt` over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseArea {
    pub value: f64,
    pub window: Window,
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn refine(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    // Start from a fixed subdivision so narrow features are not missed.
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let (lo, hi) = (
                a + k as f64 * h,
                if k + 1 == PANELS { b } else { a + (k + 1) as f64 * h },
            );
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            refine(
                f,
                lo,
                hi,
                fa,
                fm,
                fb,
                simpson(fa, fm, fb, hi - lo),
                tol / PANELS as f64,
                40,
            )
        })
        .sum()
}

/// `f(t)` on `[a, b)`, with the right end taken as a left limit.
fn left_continuous(f: &dyn Fn(f64) -> f64, b: f64) -> impl Fn(f64) -> f64 + '_ {
    move |t| f(if t >= b { b.next_down() } else { t })
}

/// Generalized area of a drive with `enhancement·Ω₀` as Rabi frequency,
/// integrated separately on each smooth segment of `window`.
pub fn generalized_area_scaled(pulse: &impl TwoLevelDrive, window: Window, enhancement: f64) -> PulseArea {
    let rate = |t: f64| (enhancement * pulse.rabi(t)).hypot(pulse.detuning(t));
    let mut edges = vec![window.start];
    let mut inner: Vec<f64> = pulse
        .breakpoints()
        .into_iter()
        .filter(|&b| b > window.start && b < window.end)
        .collect();
    inner.sort_by(f64::total_cmp);
    edges.extend(inner);
    edges.push(window.end);
    let crude: f64 = edges
        .windows(2)
        .map(|w| (w[1] - w[0]) * rate(0.5 * (w[0] + w[1])).abs())
        .sum();
    let tol = 1e-13 * crude.max(1e-300);
    let value = edges
        .windows(2)
        .map(|w| integrate(&left_continuous(&rate, w[1]), w[0], w[1], tol))
        .sum();
    PulseArea { value, window }
}

/// Generalized area `S = ∫ √(Ω₀² + δ²) dt` of a single-atom drive.
pub fn generalized_area(pulse: &impl TwoLevelDrive, window: Window) -> PulseArea {
    generalized_area_scaled(pulse, window, 1.0)
}

/// Adiabatic prediction for a double two-level passage.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublePassagePrediction {
    /// Final amplitude of the initially occupied state `|1⟩`.
    pub amplitude: Complex64,
    /// Predicted final bare amplitudes.
    pub final_state: [Complex64; 2],
    /// Generalized areas of the two passes.
    pub areas: [f64; 2],
    /// Largest adiabaticity margin along the sequence.
    pub max_margin: f64,
    /// Present when the margin exceeds [`ADIABATIC_MARGIN_LIMIT`].
    pub warning: Option<String>,
}

/// Carries bare amplitudes through one adiabatic pass: project onto the
/// dressed states at the start, attach the dynamical phases `e^{±iS/2}`, and
/// rotate back with the final mixing angle.
fn transport(
    amplitudes: [Complex64; 2],
    start: (f64, f64),
    end: (f64, f64),
    branch: AngleBranch,
    area: f64,
) -> Result<[Complex64; 2], AdiabaticError> {
    let mut dressed = DressedDecomposition::from_bare(amplitudes, start.0, start.1, branch)?;
    dressed.dressed[0] *= Complex64::from_polar(1.0, 0.5 * area);
    dressed.dressed[1] *= Complex64::from_polar(1.0, -0.5 * area);
    let (s, c) = mixing_sin_cos(end.0, end.1, branch)?;
    dressed.mixing_angle = s.atan2(c);
    Ok(dressed.to_bare())
}

/// Predicts the final amplitude of `|1⟩` when an ensemble of `n_atoms`
/// two-level atoms starting in `|1⟩` undergoes the double passage `sequence`
/// on `window`.
pub fn predict_double_arp_amplitude(
    sequence: &DoubleSequence<TwoLevelPulse>,
    window: Window,
    n_atoms: usize,
) -> Result<DoublePassagePrediction, AdiabaticError> {
    let enhancement = (n_atoms as f64).sqrt();
    let switch = sequence.switch_time;
    let passes = [
        Window {
            start: window.start,
            end: switch,
        },
        Window {
            start: switch,
            end: window.end,
        },
    ];
    let sample = |t: f64| (enhancement * sequence.rabi(t), sequence.detuning(t));
    let branches = [
        AngleBranch::for_rabi(sequence.first.rabi(sequence.first.reference_time())),
        AngleBranch::for_rabi(sequence.rabi(sequence.second.reference_time())),
    ];
    let mut state = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut areas = [0.0; 2];
    for (k, pass) in passes.iter().enumerate() {
        areas[k] = generalized_area_scaled(sequence, *pass, enhancement).value;
        state = transport(
            state,
            sample(pass.start),
            sample(pass.end.next_down()),
            branches[k],
            areas[k],
        )?;
    }

    let mut max_margin: f64 = 0.0;
    let samples = 4000;
    for i in 0..=samples {
        let t = window.start + window.duration() * i as f64 / samples as f64;
        let (rabi, detuning) = sample(t);
        let omega2 = rabi * rabi + detuning * detuning;
        let rates = (enhancement * sequence.rabi_rate(t))
            .abs()
            .max(sequence.detuning_rate(t).abs());
        max_margin = max_margin.max(rates / omega2);
    }
    let warning = (max_margin > ADIABATIC_MARGIN_LIMIT)
        .then(|| format!("adiabaticity margin {max_margin:.3} exceeds {ADIABATIC_MARGIN_LIMIT}"));
    Ok(DoublePassagePrediction {
        amplitude: state[0],
        final_state: state,
        areas,
        max_margin,
        warning,
    })
}

/// Adiabaticity margin `max(|dΩ₀/dt|, |dδ/dt|) / Ω²` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticityProfile {
    pub times: Vec<f64>,
    pub margins: Vec<f64>,
}

impl AdiabaticityProfile {
    pub fn max(&self) -> f64 {
        self.margins.iter().copied().fold(0.0, f64::max)
    }

    /// Largest margin restricted to times inside `window`.
    pub fn max_within(&self, window: Window) -> f64 {
        self.times
            .iter()
            .zip(&self.margins)
            .filter(|(t, _)| window.contains(**t))
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    }
}

/// Margin at every node of `grid` for a model equivalent to a two-level
/// system; a vanishing `Ω` gives an infinite margin.
pub fn adiabaticity_margin(model: &HamiltonianModel, grid: &TimeGrid) -> Result<AdiabaticityProfile, AdiabaticError> {
    let times = grid.nodes(&model.breakpoints());
    let margins = times
        .iter()
        .map(|&t| {
            let p = model.two_level_parameters(t).ok_or(AdiabaticError::NotTwoLevel)?;
            let omega2 = p.rabi * p.rabi + p.detuning * p.detuning;
            let rate = p.rabi_rate.abs().max(p.detuning_rate.abs());
            Ok(if omega2 == 0.0 {
                if rate == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                rate / omega2
            })
        })
        .collect::<Result<Vec<f64>, AdiabaticError>>()?;
    Ok(AdiabaticityProfile { times, margins })
}

/// Dynamical phase `-∫E dt` accumulated along the initially occupied branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPhase {
    pub times: Vec<f64>,
    pub unwrapped: Vec<f64>,
    /// Wrapped to `(-π, π]`.
    pub wrapped: Vec<f64>,
}

/// Trapezoidal `-∫E dt` along `track.initial_state_branch`.
pub fn predict_phase_from_eigentrack(track: &EigenTrack) -> BranchPhase {
    let energies = track.initial_branch();
    let mut unwrapped = Vec::with_capacity(energies.len());
    let mut acc = 0.0;
    unwrapped.push(0.0);
    for i in 1..energies.len() {
        acc -= 0.5 * (energies[i] + energies[i - 1]) * (track.times[i] - track.times[i - 1]);
        unwrapped.push(acc);
    }
    let wrapped = unwrapped.iter().map(|&p| wrap_phase(p)).collect();
    BranchPhase {
        times: track.times.clone(),
        unwrapped,
        wrapped,
    }
}

/// Adiabatic amplitudes `e^{-i∫E dt}·⟨v(0)|ψ0⟩·v(t)` along the occupied
/// branch, one row per sample of `track`.
pub fn predict_amplitudes_from_eigentrack(track: &EigenTrack, initial: &CollectiveState) -> Vec<Vec<Complex64>> {
    let phase = predict_phase_from_eigentrack(track);
    let first = &track.branch_vectors[0];
    let weight: Complex64 = first.iter().zip(&initial.amplitudes).map(|(v, a)| a * v).sum();
    phase
        .unwrapped
        .iter()
        .zip(&track.branch_vectors)
        .map(|(&p, v)| {
            let factor = weight * Complex64::from_polar(1.0, p);
            v.iter().map(|&x| factor * x).collect()
        })
        .collect()
}

/// Wrapped phase of component `k` of [`predict_amplitudes_from_eigentrack`].
pub fn predict_component_phase(track: &EigenTrack, initial: &CollectiveState, k: usize) -> Vec<f64> {
    predict_amplitudes_from_eigentrack(track, initial)
        .iter()
        .map(|row| row[k].arg())
        .collect()
}

/// Largest circular distance between the propagated phase of component `k`
/// and its adiabatic prediction, over samples shared by `trajectory` and
/// `track` where the component's population exceeds `population_floor`.
/// `None` when no sample qualifies.
pub fn phase_deviation(
    trajectory: &Trajectory,
    track: &EigenTrack,
    initial: &CollectiveState,
    k: usize,
    population_floor: f64,
) -> Option<f64> {
    let predicted = predict_component_phase(track, initial, k);
    let mut worst: Option<f64> = None;
    let mut j = 0;
    for (t, amps) in trajectory.times.iter().zip(&trajectory.amplitudes) {
        while j < track.times.len() && track.times[j] < *t {
            j += 1;
        }
        if j == track.times.len() {
            break;
        }
        if track.times[j] != *t || amps[k].norm_sqr() <= population_floor {
            continue;
        }
        let d = wrap_phase(amps[k].arg() - predicted[j]).abs();
        worst = Some(worst.map_or(d, |w: f64| w.max(d)));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{eigen_track, propagate, DEFAULT_STEPS_PER_US};
    use crate::pulses::{DoubleMode, GaussianChirpPulse, SquarePulse};
    use crate::units::mhz;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};

    fn fig2() -> GaussianChirpPulse {
        GaussianChirpPulse::new(mhz(5.0), 1.0, 0.0, mhz(-1.0)).unwrap()
    }

    fn fig7(mode: DoubleMode) -> (DoubleSequence<TwoLevelPulse>, Window) {
        let single = fig2().support();
        let half = single.end;
        let first: TwoLevelPulse = fig2().shifted(half).into();
        let seq = DoubleSequence::repeated(first, 2.0 * half, mode);
        (seq, Window::new(0.0, 4.0 * half).unwrap())
    }

    #[test]
    fn mixing_angle_limits() {
        assert_eq!(mixing_angle(0.0, 1.0, AngleBranch::Standard).unwrap(), 0.0);
        assert_relative_eq!(mixing_angle(0.0, -1.0, AngleBranch::Standard).unwrap(), FRAC_PI_2);
        assert_relative_eq!(
            mixing_angle(2.0, 2.0, AngleBranch::Standard).unwrap(),
            FRAC_PI_8,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            mixing_angle(-2.0, 2.0, AngleBranch::SignFlipped).unwrap(),
            -FRAC_PI_8,
            epsilon = 1e-15
        );
        assert_eq!(
            mixing_angle(0.0, 0.0, AngleBranch::Standard),
            Err(AdiabaticError::UndefinedAngle)
        );
    }

    #[test]
    fn lower_dressed_state_is_an_eigenvector() {
        let (rabi, detuning) = (1.3, -0.4);
        let theta = mixing_angle(rabi, detuning, AngleBranch::Standard).unwrap();
        let [c1, c2] = lower_dressed_prediction(theta, Complex64::new(1.0, 0.0));
        let omega = rabi.hypot(detuning);
        let h1 = 0.5 * (-detuning * c1 + rabi * c2);
        let h2 = 0.5 * (rabi * c1 + detuning * c2);
        assert_relative_eq!(h1.re, -0.5 * omega * c1.re, epsilon = 1e-14);
        assert_relative_eq!(h2.re, -0.5 * omega * c2.re, epsilon = 1e-14);
    }

    #[test]
    fn constant_resonant_area() {
        let p = SquarePulse::new(3.0, 0.0, Window::new(0.0, 2.0).unwrap());
        let area = generalized_area(&p, Window::new(0.0, 2.0).unwrap());
        assert_relative_eq!(area.value, 6.0, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_area_matches_closed_form() {
        let p = GaussianChirpPulse::new(2.0, 0.8, 0.3, 0.0).unwrap();
        let area = generalized_area(&p, Window::new(-9.7, 10.3).unwrap());
        let exact = 2.0 * 0.8 * (2.0 * PI).sqrt();
        assert_relative_eq!(area.value, exact, max_relative = 1e-10);
    }

    #[test]
    fn simpson_handles_polynomials_and_oscillations() {
        assert_relative_eq!(integrate(&|x| x * x * x, 0.0, 2.0, 1e-14), 4.0, max_relative = 1e-14);
        assert_relative_eq!(integrate(&|x: f64| x.sin(), 0.0, PI, 1e-13), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn fig2_margin_stays_small() {
        let model = HamiltonianModel::arp(fig2());
        let grid = TimeGrid::with_density(fig2().support(), 1000.0).unwrap();
        let profile = adiabaticity_margin(&model, &grid).unwrap();
        assert!(profile.max() < 0.1);
        assert_relative_eq!(profile.max(), 0.0796, epsilon = 5e-4);
    }

    #[test]
    fn constant_resonant_margin_is_zero() {
        let p = SquarePulse::new(3.0, 0.0, Window::new(0.0, 2.0).unwrap());
        let grid = TimeGrid::new(0.5, 1.5, 10).unwrap();
        let profile = adiabaticity_margin(&HamiltonianModel::arp(p), &grid).unwrap();
        assert!(profile.margins.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn vanishing_gap_gives_infinite_margin() {
        let p = GaussianChirpPulse::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let grid = TimeGrid::new(-1.0, 1.0, 2).unwrap();
        let profile = adiabaticity_margin(&HamiltonianModel::arp(p), &grid).unwrap();
        assert!(profile.margins[1].is_infinite());
    }

    #[test]
    fn nonlinear_sweep_margin_at_resonance() {
        let p = crate::pulses::NonlinearDetuningPulse::new(
            mhz(2.1),
            vec![0.5, 1.5],
            mhz(-10.0),
            mhz(-2000.0),
            crate::pulses::OddPower::Cubic,
            Window::new(0.0, 2.0).unwrap(),
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        let profile = adiabaticity_margin(&HamiltonianModel::arp(p), &grid).unwrap();
        let at_resonance = profile.margins[500];
        let expected = 10.0 / (2.0 * PI * 2.1 * 2.1);
        assert_relative_eq!(at_resonance, expected, max_relative = 1e-12);
    }

    #[test]
    fn margin_requires_two_level_model() {
        let pair = crate::pulses::StirapPair::new(1.0, 1.0, -1.0, 1.0, 1.0, 0.0).unwrap();
        let grid = TimeGrid::new(-1.0, 1.0, 4).unwrap();
        assert_eq!(
            adiabaticity_margin(&HamiltonianModel::stirap(pair), &grid),
            Err(AdiabaticError::NotTwoLevel)
        );
    }

    #[test]
    fn double_passage_predictions() {
        let (identical, window) = fig7(DoubleMode::Identical);
        let p = predict_double_arp_amplitude(&identical, window, 1).unwrap();
        assert!((p.amplitude + 1.0).norm() < 1e-9, "{}", p.amplitude);
        assert!(p.warning.is_none());
        let (flipped, window) = fig7(DoubleMode::PhaseFlipped);
        let p = predict_double_arp_amplitude(&flipped, window, 1).unwrap();
        assert!((p.amplitude - 1.0).norm() < 1e-9, "{}", p.amplitude);
    }

    #[test]
    fn unequal_areas_leave_half_area_difference() {
        let half = fig2().support().end;
        let first: TwoLevelPulse = fig2().shifted(half).into();
        let second: TwoLevelPulse = GaussianChirpPulse::new(mhz(6.0), 1.0, 3.0 * half, mhz(-1.0))
            .unwrap()
            .into();
        let seq = DoubleSequence {
            first,
            second,
            mode: DoubleMode::Identical,
            switch_time: 2.0 * half,
        };
        let window = Window::new(0.0, 4.0 * half).unwrap();
        let p = predict_double_arp_amplitude(&seq, window, 1).unwrap();
        let expected = -Complex64::from_polar(1.0, 0.5 * (p.areas[0] - p.areas[1]));
        assert!((p.amplitude - expected).norm() < 1e-9);

        let model = HamiltonianModel::arp(TwoLevelPulse::from(seq));
        let grid = TimeGrid::with_density(window, DEFAULT_STEPS_PER_US).unwrap();
        let traj = propagate(&model, &CollectiveState::basis_vector(2, 0), &grid).unwrap();
        let numeric = traj.final_amplitudes()[0];
        assert!((numeric.arg() - expected.arg()).abs() < 0.02, "{numeric} vs {expected}");
    }

    #[test]
    fn zero_branch_predicts_zero_phase() {
        let pair = crate::pulses::StirapPair::new(mhz(10.0), mhz(10.0), -1.0, 1.0, 1.0, 0.0).unwrap();
        let model = HamiltonianModel::ensemble_three_level(2, crate::statespace::Representation::Full, pair).unwrap();
        let track = eigen_track(
            &model,
            &TimeGrid::new(-5.0, 5.0, 200).unwrap(),
            &CollectiveState::basis_vector(8, 0),
        )
        .unwrap();
        let zero = track.zero_branch(1e-10).unwrap();
        let track = EigenTrack {
            initial_state_branch: zero,
            ..track
        };
        let phase = predict_phase_from_eigentrack(&track);
        assert!(phase.unwrapped.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn phase_deviation_of_an_undriven_eigenstate() {
        let p = SquarePulse::new(0.0, mhz(3.0), Window::new(0.0, 2.0).unwrap());
        let model = HamiltonianModel::arp(p);
        let grid = TimeGrid::new(0.0, 2.0, 20_000).unwrap();
        let psi = CollectiveState::basis_vector(2, 1);
        let traj = propagate(&model, &psi, &grid).unwrap();
        let track = crate::propagator::eigen_track_at(&model, &traj.times, &psi).unwrap();
        assert!(phase_deviation(&traj, &track, &psi, 1, 0.5).unwrap() < 1e-9);
        assert_eq!(phase_deviation(&traj, &track, &psi, 0, 1e-3), None);
        let sparse = crate::propagator::eigen_track_at(&model, &traj.times[..3], &psi).unwrap();
        assert!(phase_deviation(&traj, &sparse, &psi, 1, 0.5).is_some());
    }

    #[test]
    fn dressed_prediction_tracks_fig2_populations() {
        let model = HamiltonianModel::arp(fig2());
        let grid = TimeGrid::with_density(fig2().support(), DEFAULT_STEPS_PER_US).unwrap();
        let traj = propagate(&model, &CollectiveState::basis_vector(2, 0), &grid).unwrap();
        let p = fig2();
        let mut worst: f64 = 0.0;
        for (t, amps) in traj.times.iter().zip(&traj.amplitudes) {
            let (rabi, detuning) = (p.rabi(*t), p.detuning(*t));
            let omega2 = rabi * rabi + detuning * detuning;
            if p.rabi_rate(*t).abs().max(p.detuning_rate(*t).abs()) / omega2 >= 0.05 {
                continue;
            }
            let theta = mixing_angle(rabi, detuning, AngleBranch::Standard).unwrap();
            let [c1, c2] = lower_dressed_prediction(theta, Complex64::new(1.0, 0.0));
            worst = worst
                .max((amps[0].norm() - c1.norm()).abs())
                .max((amps[1].norm() - c2.norm()).abs());
        }
        assert!(worst < 1e-2, "{worst}");
    }

    proptest! {
        #[test]
        fn branch_identities(rabi in -50.0f64..50.0, detuning in -50.0f64..50.0) {
            prop_assume!(rabi.abs() > 1e-6 && detuning.abs() > 1e-6);
            let branch = AngleBranch::for_rabi(rabi);
            let (s, c) = mixing_sin_cos(rabi, detuning, branch).unwrap();
            prop_assert!((s * s + c * c - 1.0).abs() < 1e-12);
            let theta = mixing_angle(rabi, detuning, branch).unwrap();
            let lhs = (2.0 * theta).tan() * detuning;
            prop_assert!((lhs - rabi).abs() <= 1e-12 * rabi.abs().max(detuning.abs()) * 10.0);
            match branch {
                AngleBranch::Standard => prop_assert!((0.0..=FRAC_PI_2).contains(&theta)),
                AngleBranch::SignFlipped => prop_assert!((-FRAC_PI_2..=0.0).contains(&theta)),
            }
        }

        #[test]
        fn dressed_round_trip(re1 in -1.0f64..1.0, im1 in -1.0f64..1.0, re2 in -1.0f64..1.0, im2 in -1.0f64..1.0,
                              rabi in -10.0f64..10.0, detuning in -10.0f64..10.0) {
            prop_assume!(rabi.hypot(detuning) > 1e-6);
            let bare = [Complex64::new(re1, im1), Complex64::new(re2, im2)];
            let d = DressedDecomposition::from_bare(bare, rabi, detuning, AngleBranch::for_rabi(rabi)).unwrap();
            let back = d.to_bare();
            prop_assert!((back[0] - bare[0]).norm() < 1e-12 && (back[1] - bare[1]).norm() < 1e-12);
            let norm_in = bare[0].norm_sqr() + bare[1].norm_sqr();
            let norm_out = d.dressed[0].norm_sqr() + d.dressed[1].norm_sqr();
            prop_assert!((norm_in - norm_out).abs() < 1e-12);
        }
    }
}
