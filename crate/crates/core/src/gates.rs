//! Gate protocols for ensemble qubits and Förster-coupled atom pairs.
//!
//! Each ensemble is described by four collective states: the logical states
//! `0̄`, `1̄` and the auxiliary Rydberg states `r̄0`, `r̄1`. Steps act on the
//! physical basis, in which every singly excited state carries the unknown
//! phase `e^{iχ_N}` of one adiabatic excitation; results are reported in the
//! logical frame where that phase is absorbed into the state definitions.
//!
//! Two ensembles block each other: an optical step on one ensemble does
//! nothing while the other holds a Rydberg excitation. Microwave rotations
//! between `r̄0` and `r̄1` are never blocked.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiabatic::{adiabaticity_margin, AdiabaticError};
use crate::hamiltonians::{ForsterChannelParams, HamiltonianError, HamiltonianModel};
use crate::propagator::{propagate, ExcitationSettings, PropagationError, Protocol, TimeGrid};
use crate::pulses::{PulseError, SquarePulse, StirapPair, StirapPulse};
use crate::statespace::{BasisState, CollectiveState, Occupation, Representation};
use crate::units::wrap_phase;

/// Complex square matrix acting on logical or collective amplitudes.
pub type Operator = DMatrix<Complex64>;

/// Margin above which a Förster passage is reported as low confidence.
pub const FORSTER_MARGIN_LIMIT: f64 = 0.05;

/// Norm deviation tolerated for input states.
const INPUT_NORM_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateError {
    #[error("input state has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("matrix dimensions differ: {expected} vs {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("ensemble basis lacks the state {0}")]
    MissingState(String),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Adiabatic(#[from] AdiabaticError),
    #[error(transparent)]
    Model(#[from] HamiltonianError),
}

/// Collective state of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleLevel {
    Logical0,
    Logical1,
    Rydberg0,
    Rydberg1,
}

impl EnsembleLevel {
    pub const ALL: [EnsembleLevel; 4] = [Self::Logical0, Self::Logical1, Self::Rydberg0, Self::Rydberg1];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Logical0 => "0",
            Self::Logical1 => "1",
            Self::Rydberg0 => "r0",
            Self::Rydberg1 => "r1",
        }
    }

    pub fn is_rydberg(self) -> bool {
        matches!(self, Self::Rydberg0 | Self::Rydberg1)
    }
}

/// Auxiliary Rydberg level addressed by an optical pulse from `1̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RydbergLevel {
    R0,
    R1,
}

impl RydbergLevel {
    pub fn level(self) -> EnsembleLevel {
        match self {
            Self::R0 => EnsembleLevel::Rydberg0,
            Self::R1 => EnsembleLevel::Rydberg1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ensemble {
    Control,
    Target,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStepKind {
    /// Adiabatic transfer `0̄ → r̄0`.
    StirapUp,
    /// Adiabatic transfer `r̄0 → 0̄`.
    StirapDown,
    /// Resonant π pulse between `1̄` and the given Rydberg level.
    PiPulse(RydbergLevel),
    /// Resonant 3π pulse between `1̄` and the given Rydberg level.
    ThreePiPulse(RydbergLevel),
    MicrowaveRotation {
        theta: f64,
        phi: f64,
    },
    /// Double adiabatic passage across the Förster resonance.
    ForsterPassage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateStep {
    pub kind: GateStepKind,
    pub ensemble: Ensemble,
}

impl GateStep {
    pub const fn new(kind: GateStepKind, ensemble: Ensemble) -> Self {
        Self { kind, ensemble }
    }

    fn is_optical(&self) -> bool {
        !matches!(self.kind, GateStepKind::MicrowaveRotation { .. })
    }
}

/// Logical frame of one ensemble: `1̄ = e^{iχ}1̄'`, `r̄k = e^{iχ}r̄k'`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogicalEncoding {
    pub chi: f64,
}

impl LogicalEncoding {
    pub fn new(chi: f64) -> Self {
        Self { chi }
    }

    /// Diagonal map from logical to physical coordinates.
    pub fn frame(&self) -> Operator {
        let p = Complex64::from_polar(1.0, self.chi);
        Operator::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, p, p, p]))
    }

    /// 4×2 embedding of the logical qubit into the physical ensemble space.
    pub fn isometry(&self) -> Operator {
        self.frame().columns(0, 2).into_owned()
    }
}

/// Amplitude of one labelled basis state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    pub amplitude: Complex64,
}

/// Nonzero logical-frame amplitudes after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSnapshot {
    /// `None` for the input state.
    pub step: Option<GateStep>,
    pub components: Vec<Component>,
}

impl StepSnapshot {
    fn new(step: Option<GateStep>, labels: &[String], amplitudes: &[Complex64]) -> Self {
        let components = labels
            .iter()
            .zip(amplitudes)
            .filter(|(_, a)| a.norm() > 1e-12)
            .map(|(l, a)| Component {
                label: l.clone(),
                amplitude: *a,
            })
            .collect();
        Self { step, components }
    }

    /// Amplitude of `label`, zero when absent.
    pub fn amplitude(&self, label: &str) -> Complex64 {
        self.components
            .iter()
            .find(|c| c.label == label)
            .map_or(ZERO, |c| c.amplitude)
    }
}

/// Diagnostics specific to the Förster controlled-phase gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledPhaseDiagnostics {
    /// Phases of the diagonal entries for `00, 01, 10, 11`.
    pub diagonal_phases: [f64; 4],
    /// `φ11 - φ10 - φ01 + φ00`, wrapped to `(-π, π]`.
    pub entangling_phase: f64,
    /// Population not returned to the initial pair channel.
    pub population_error: f64,
    /// Final amplitude of the initial pair channel.
    pub channel_amplitude: Complex64,
    pub max_margin: f64,
    pub coupling: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    /// Logical-subspace matrix, row-major.
    pub achieved: Vec<Vec<Complex64>>,
    pub target: Vec<Vec<Complex64>>,
    pub fidelity: f64,
    pub steps: Vec<StepSnapshot>,
    /// Set when a passage violated its adiabaticity limit.
    pub low_confidence: bool,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controlled_phase: Option<ControlledPhaseDiagnostics>,
}

/// Largest entry modulus of `a - b`.
pub fn max_deviation(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn to_rows(m: &Operator) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<Complex64>]) -> Operator {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Operator::from_fn(n, m, |i, j| rows[i][j])
}

/// `exp(-iθ/2 (cosφ σx + sinφ σy))`.
pub fn rotation(theta: f64, phi: f64) -> Operator {
    let (s, c) = quarter_exact_sin_cos(0.5 * theta);
    let (sp, cp) = quarter_exact_sin_cos(phi);
    Operator::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            -I * s * Complex64::new(cp, -sp),
            -I * s * Complex64::new(cp, sp),
            Complex64::new(c, 0.0),
        ],
    )
}

/// `sin_cos` that returns exact values at integer multiples of `π/2`.
fn quarter_exact_sin_cos(x: f64) -> (f64, f64) {
    let quarters = x / std::f64::consts::FRAC_PI_2;
    let k = quarters.round();
    if (quarters - k).abs() <= 4.0 * f64::EPSILON * k.abs().max(1.0) {
        match (k as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        x.sin_cos()
    }
}

/// `exp(-iθσy/2)`.
pub fn rotation_y(theta: f64) -> Operator {
    rotation(theta, std::f64::consts::FRAC_PI_2)
}

/// Microwave rotation on `(r̄0, r̄1)` with amplitudes written as
/// `(x, iy)`, so that `(a, ib) -> (a', -ib')` when `(a', -b') = R(a, b)`.
pub fn microwave_operator(theta: f64, phi: f64) -> Operator {
    let d = Operator::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, I]));
    let block = &d * rotation(theta, phi) * d.adjoint();
    let mut op = Operator::identity(4, 4);
    let (r0, r1) = (EnsembleLevel::Rydberg0.index(), EnsembleLevel::Rydberg1.index());
    op[(r0, r0)] = block[(0, 0)];
    op[(r0, r1)] = block[(0, 1)];
    op[(r1, r0)] = block[(1, 0)];
    op[(r1, r1)] = block[(1, 1)];
    op
}

/// Embeds a 2×2 block acting on the levels `(a, b)` of one ensemble.
fn embed_block(block: &Matrix2<Complex64>, a: EnsembleLevel, b: EnsembleLevel) -> Operator {
    let mut op = Operator::identity(4, 4);
    let (i, j) = (a.index(), b.index());
    op[(i, i)] = block[(0, 0)];
    op[(i, j)] = block[(0, 1)];
    op[(j, i)] = block[(1, 0)];
    op[(j, j)] = block[(1, 1)];
    op
}

/// Resonant pulse of area `k·π` with the `+iσx` convention for `k = 1`.
fn ideal_pulse_block(multiple: u32) -> Matrix2<Complex64> {
    let (s, c) = quarter_exact_sin_cos(0.5 * multiple as f64 * std::f64::consts::PI);
    Matrix2::new(Complex64::new(c, 0.0), I * s, I * s, Complex64::new(c, 0.0))
}

/// Step maps of one ensemble in its physical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOperators {
    pub encoding: LogicalEncoding,
    pub up: Operator,
    pub down: Operator,
    pub pi_r0: Operator,
    pub pi_r1: Operator,
    pub three_pi_r0: Operator,
    pub three_pi_r1: Operator,
}

impl EnsembleOperators {
    /// Exact step maps. In the logical frame `0̄ → r̄0`, `r̄0 → -0̄` for the
    /// up transfer, its inverse for the down transfer, and `iσx` between
    /// `1̄` and a Rydberg level for a π pulse. Transfers on `1̄` and `r̄1`
    /// are blocked and act as the identity.
    pub fn idealized(encoding: LogicalEncoding) -> Self {
        let up_logical = embed_block(
            &Matrix2::new(ZERO, -ONE, ONE, ZERO),
            EnsembleLevel::Logical0,
            EnsembleLevel::Rydberg0,
        );
        let frame = encoding.frame();
        let up = &frame * &up_logical * frame.adjoint();
        let down = up.adjoint();
        Self::assemble(encoding, up, down, ideal_pulse_block(1), ideal_pulse_block(3))
    }

    /// Step maps from propagated pulses on an `n_atoms` ensemble. The
    /// encoding phase is taken from the up transfer of the ground state.
    pub fn dynamical(n_atoms: usize, settings: &DynamicalSettings) -> Result<Self, GateError> {
        let up_block = adiabatic_block(&settings.up, n_atoms, settings.steps_per_us)?;
        let down_block = adiabatic_block(&settings.down, n_atoms, settings.steps_per_us)?;
        let encoding = LogicalEncoding::new(up_block[(1, 0)].arg());
        let up = embed_block(&up_block, EnsembleLevel::Logical0, EnsembleLevel::Rydberg0);
        let down = embed_block(&down_block, EnsembleLevel::Logical0, EnsembleLevel::Rydberg0);
        let pi = resonant_pulse_block(settings.pi_rabi, 1, settings.steps_per_us)?;
        let three_pi = resonant_pulse_block(settings.pi_rabi, 3, settings.steps_per_us)?;
        Ok(Self::assemble(encoding, up, down, pi, three_pi))
    }

    fn assemble(
        encoding: LogicalEncoding,
        up: Operator,
        down: Operator,
        pi: Matrix2<Complex64>,
        three_pi: Matrix2<Complex64>,
    ) -> Self {
        let stored = EnsembleLevel::Logical1;
        Self {
            encoding,
            up,
            down,
            pi_r0: embed_block(&pi, stored, EnsembleLevel::Rydberg0),
            pi_r1: embed_block(&pi, stored, EnsembleLevel::Rydberg1),
            three_pi_r0: embed_block(&three_pi, stored, EnsembleLevel::Rydberg0),
            three_pi_r1: embed_block(&three_pi, stored, EnsembleLevel::Rydberg1),
        }
    }

    /// Physical map of a local step; `None` for the Förster passage.
    fn operator(&self, kind: GateStepKind) -> Option<Operator> {
        Some(match kind {
            GateStepKind::StirapUp => self.up.clone(),
            GateStepKind::StirapDown => self.down.clone(),
            GateStepKind::PiPulse(RydbergLevel::R0) => self.pi_r0.clone(),
            GateStepKind::PiPulse(RydbergLevel::R1) => self.pi_r1.clone(),
            GateStepKind::ThreePiPulse(RydbergLevel::R0) => self.three_pi_r0.clone(),
            GateStepKind::ThreePiPulse(RydbergLevel::R1) => self.three_pi_r1.clone(),
            GateStepKind::MicrowaveRotation { theta, phi } => microwave_operator(theta, phi),
            GateStepKind::ForsterPassage => return None,
        })
    }
}

/// Pulses used for dynamical step maps.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSettings {
    pub up: Protocol,
    pub down: Protocol,
    /// Magnitude of the single-atom Rabi frequency of `1̄ ↔ r̄k` pulses.
    pub pi_rabi: f64,
    pub steps_per_us: f64,
}

impl DynamicalSettings {
    /// Up transfer with `pair`; down transfer with its time mirror image and
    /// reversed intermediate detuning.
    pub fn mirrored_stirap(pair: StirapPair, pi_rabi: f64, steps_per_us: f64) -> Self {
        let about = 0.5 * (pair.stokes_center + pair.pump_center);
        let mut down = pair.mirrored(about);
        down.detuning = -down.detuning;
        Self {
            up: Protocol::Stirap(StirapPulse::Gaussian(pair)),
            down: Protocol::Stirap(StirapPulse::Gaussian(down)),
            pi_rabi,
            steps_per_us,
        }
    }
}

/// Block of the propagator on `(ground, single Rydberg)` of an ensemble.
fn adiabatic_block(protocol: &Protocol, n_atoms: usize, steps_per_us: f64) -> Result<Matrix2<Complex64>, GateError> {
    let model = protocol.model(n_atoms, Representation::Symmetric)?;
    let basis = model
        .basis()
        .ok_or_else(|| GateError::MissingState("ensemble basis".into()))?;
    let excited = BasisState::Symmetric(Occupation::new(n_atoms - 1, 0, 1));
    let r = basis
        .index_of(&excited)
        .ok_or_else(|| GateError::MissingState(excited.label()))?;
    let g = basis.ground_index();
    let grid = TimeGrid::with_density(protocol.support(), steps_per_us)?;
    let from_g = propagate(&model, &CollectiveState::basis_vector(model.dim(), g), &grid)?;
    let from_r = propagate(&model, &CollectiveState::basis_vector(model.dim(), r), &grid)?;
    let (cg, cr) = (from_g.final_amplitudes(), from_r.final_amplitudes());
    Ok(Matrix2::new(cg[g], cr[g], cg[r], cr[r]))
}

/// Propagated single-atom square pulse of area `multiple·π`, driven with a
/// negative Rabi frequency so that a π pulse gives `+iσx`.
fn resonant_pulse_block(rabi: f64, multiple: u32, steps_per_us: f64) -> Result<Matrix2<Complex64>, GateError> {
    let pulse = SquarePulse::with_area(-rabi.abs(), multiple as f64 * std::f64::consts::PI, 0.0)?;
    let model = HamiltonianModel::arp(pulse);
    let grid = TimeGrid::with_density(pulse.window, steps_per_us)?;
    let a = propagate(&model, &CollectiveState::basis_vector(2, 0), &grid)?;
    let b = propagate(&model, &CollectiveState::basis_vector(2, 1), &grid)?;
    let (ca, cb) = (a.final_amplitudes(), b.final_amplitudes());
    Ok(Matrix2::new(ca[0], cb[0], ca[1], cb[1]))
}

fn check_input(amplitudes: &[Complex64]) -> Result<(), GateError> {
    let norm = amplitudes.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > INPUT_NORM_TOLERANCE {
        return Err(GateError::NotNormalized(norm));
    }
    Ok(())
}

/// The five steps of the single-qubit rotation.
pub fn single_qubit_sequence(theta: f64, phi: f64) -> [GateStep; 5] {
    use GateStepKind::*;
    let t = Ensemble::Target;
    [
        GateStep::new(PiPulse(RydbergLevel::R1), t),
        GateStep::new(StirapUp, t),
        GateStep::new(MicrowaveRotation { theta, phi }, t),
        GateStep::new(StirapDown, t),
        GateStep::new(PiPulse(RydbergLevel::R1), t),
    ]
}

/// The seven steps of the ensemble CNOT.
pub fn cnot_sequence() -> [GateStep; 7] {
    use GateStepKind::*;
    use RydbergLevel::*;
    let (c, t) = (Ensemble::Control, Ensemble::Target);
    [
        GateStep::new(PiPulse(R0), c),
        GateStep::new(PiPulse(R1), t),
        GateStep::new(StirapUp, t),
        GateStep::new(
            MicrowaveRotation {
                theta: std::f64::consts::PI,
                phi: std::f64::consts::FRAC_PI_2,
            },
            Ensemble::Both,
        ),
        GateStep::new(StirapDown, t),
        GateStep::new(PiPulse(R1), t),
        GateStep::new(PiPulse(R1), c),
    ]
}

/// Result of running a gate sequence on one input.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRun {
    /// Final logical amplitudes.
    pub output: Vec<Complex64>,
    /// Weight left outside the logical subspace.
    pub leakage: f64,
    /// Input state followed by the state after every step.
    pub steps: Vec<StepSnapshot>,
}

fn ensemble_labels() -> Vec<String> {
    EnsembleLevel::ALL.iter().map(|l| l.label().to_string()).collect()
}

/// Runs the single-qubit rotation on `a|0̄⟩ + b|1̄⟩`.
pub fn single_qubit_gate(
    a: Complex64,
    b: Complex64,
    theta: f64,
    phi: f64,
    ops: &EnsembleOperators,
) -> Result<GateRun, GateError> {
    check_input(&[a, b])?;
    let frame = ops.encoding.frame();
    let labels = ensemble_labels();
    let mut logical = nalgebra::DVector::from_vec(vec![a, b, ZERO, ZERO]);
    let mut physical = &frame * &logical;
    let mut steps = vec![StepSnapshot::new(None, &labels, logical.as_slice())];
    for step in single_qubit_sequence(theta, phi) {
        let op = ops.operator(step.kind).expect("local step");
        physical = op * physical;
        logical = frame.adjoint() * &physical;
        steps.push(StepSnapshot::new(Some(step), &labels, logical.as_slice()));
    }
    Ok(GateRun {
        output: vec![logical[0], logical[1]],
        leakage: logical[2].norm_sqr() + logical[3].norm_sqr(),
        steps,
    })
}

/// Logical matrix realized by the single-qubit sequence, `diag(1, -1)·R`.
pub fn single_qubit_target(theta: f64, phi: f64) -> Operator {
    let z = Operator::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE]));
    z * rotation(theta, phi)
}

pub fn single_qubit_report(theta: f64, phi: f64, ops: &EnsembleOperators) -> Result<GateReport, GateError> {
    let mut achieved = Operator::zeros(2, 2);
    let mut steps = Vec::new();
    for col in 0..2 {
        let (a, b) = if col == 0 { (ONE, ZERO) } else { (ZERO, ONE) };
        let run = single_qubit_gate(a, b, theta, phi, ops)?;
        achieved.set_column(col, &nalgebra::DVector::from_vec(run.output));
        steps.extend(run.steps);
    }
    let target = single_qubit_target(theta, phi);
    Ok(GateReport {
        fidelity: gate_fidelity(&achieved, &target)?,
        achieved: to_rows(&achieved),
        target: to_rows(&target),
        steps,
        low_confidence: false,
        notes: Vec::new(),
        controlled_phase: None,
    })
}

/// Two coupled four-level registers, index `4·control + target`, plus
/// optional extra pair channels reached only through the Förster passage.
struct PairRegister {
    amplitudes: Vec<Complex64>,
    labels: Vec<String>,
    blockade: bool,
}

impl PairRegister {
    fn new(input: &[Complex64; 4], frames: [&Operator; 2], blockade: bool, extra: &[String]) -> Self {
        let mut amplitudes = vec![ZERO; 16 + extra.len()];
        for (k, &a) in input.iter().enumerate() {
            amplitudes[4 * (k / 2) + k % 2] = a;
        }
        let mut labels = Vec::with_capacity(amplitudes.len());
        for c in EnsembleLevel::ALL {
            for t in EnsembleLevel::ALL {
                labels.push(format!("{},{}", c.label(), t.label()));
            }
        }
        labels.extend(extra.iter().cloned());
        let mut register = Self {
            amplitudes,
            labels,
            blockade,
        };
        register.apply_frames(frames, false);
        register
    }

    fn apply_frames(&mut self, frames: [&Operator; 2], inverse: bool) {
        for c in 0..4 {
            for t in 0..4 {
                let mut f = frames[0][(c, c)] * frames[1][(t, t)];
                if inverse {
                    f = f.conj();
                }
                self.amplitudes[4 * c + t] *= f;
            }
        }
    }

    fn logical_view(&self, frames: [&Operator; 2]) -> Vec<Complex64> {
        let mut copy = Self {
            amplitudes: self.amplitudes.clone(),
            labels: Vec::new(),
            blockade: self.blockade,
        };
        copy.apply_frames(frames, true);
        copy.amplitudes
    }

    fn apply_local(&mut self, op: &Operator, on_control: bool, gated: bool) {
        let old = self.amplitudes.clone();
        for other in 0..4 {
            if gated && self.blockade && EnsembleLevel::ALL[other].is_rydberg() {
                continue;
            }
            for out in 0..4 {
                let mut acc = ZERO;
                for inp in 0..4 {
                    let idx = if on_control { 4 * inp + other } else { 4 * other + inp };
                    acc += op[(out, inp)] * old[idx];
                }
                let idx = if on_control { 4 * out + other } else { 4 * other + out };
                self.amplitudes[idx] = acc;
            }
        }
    }
}

fn run_pair_sequence(
    input: &[Complex64; 4],
    sequence: &[GateStep],
    control: &EnsembleOperators,
    target: &EnsembleOperators,
    blockade: bool,
    forster: Option<&ForsterOutcome>,
) -> Result<GateRun, GateError> {
    check_input(input)?;
    let (fc, ft) = (control.encoding.frame(), target.encoding.frame());
    let frames = [&fc, &ft];
    let extra: Vec<String> = forster.map(|f| f.leaked_labels.clone()).unwrap_or_default();
    let mut reg = PairRegister::new(input, frames, blockade, &extra);
    let mut steps = vec![StepSnapshot::new(None, &reg.labels, &reg.logical_view(frames))];
    for step in sequence {
        let gated = step.is_optical();
        match step.kind {
            GateStepKind::ForsterPassage => {
                if let Some(outcome) = forster {
                    let pair = 4 * EnsembleLevel::Rydberg0.index() + EnsembleLevel::Rydberg1.index();
                    let initial = reg.amplitudes[pair];
                    reg.amplitudes[pair] = initial * outcome.amplitudes[0];
                    for (k, a) in outcome.amplitudes[1..].iter().enumerate() {
                        reg.amplitudes[16 + k] += initial * a;
                    }
                }
            }
            kind => {
                if matches!(step.ensemble, Ensemble::Control | Ensemble::Both) {
                    reg.apply_local(&control.operator(kind).expect("local step"), true, gated);
                }
                if matches!(step.ensemble, Ensemble::Target | Ensemble::Both) {
                    reg.apply_local(&target.operator(kind).expect("local step"), false, gated);
                }
            }
        }
        steps.push(StepSnapshot::new(Some(*step), &reg.labels, &reg.logical_view(frames)));
    }
    let view = reg.logical_view(frames);
    let output: Vec<Complex64> = [0, 1, 4, 5].iter().map(|&k| view[k]).collect();
    let kept: f64 = output.iter().map(Complex64::norm_sqr).sum();
    let total: f64 = view.iter().map(Complex64::norm_sqr).sum();
    Ok(GateRun {
        output,
        leakage: (total - kept).max(0.0),
        steps,
    })
}

/// Runs the ensemble CNOT on `a|0̄0̄⟩ + b|0̄1̄⟩ + c|1̄0̄⟩ + d|1̄1̄⟩`.
pub fn cnot_gate(
    input: [Complex64; 4],
    control: &EnsembleOperators,
    target: &EnsembleOperators,
) -> Result<GateRun, GateError> {
    run_pair_sequence(&input, &cnot_sequence(), control, target, true, None)
}

/// Matrix of the ensemble CNOT in the logical basis `00, 01, 10, 11`.
pub fn ensemble_cnot_matrix() -> Operator {
    let mut u = Operator::zeros(4, 4);
    u[(0, 1)] = -ONE;
    u[(1, 0)] = -ONE;
    u[(2, 2)] = -I;
    u[(3, 3)] = -I;
    u
}

fn logical_basis(k: usize) -> [Complex64; 4] {
    let mut v = [ZERO; 4];
    v[k] = ONE;
    v
}

/// Logical matrix of a pair sequence, assembled column by column.
fn pair_matrix(
    sequence: &[GateStep],
    control: &EnsembleOperators,
    target: &EnsembleOperators,
    blockade: bool,
    forster: Option<&ForsterOutcome>,
) -> Result<(Operator, Vec<StepSnapshot>), GateError> {
    let mut u = Operator::zeros(4, 4);
    let mut steps = Vec::new();
    for col in 0..4 {
        let run = run_pair_sequence(&logical_basis(col), sequence, control, target, blockade, forster)?;
        u.set_column(col, &nalgebra::DVector::from_vec(run.output));
        steps.extend(run.steps);
    }
    Ok((u, steps))
}

/// Logical matrix of the ensemble CNOT.
pub fn cnot_matrix(control: &EnsembleOperators, target: &EnsembleOperators) -> Result<Operator, GateError> {
    Ok(pair_matrix(&cnot_sequence(), control, target, true, None)?.0)
}

pub fn cnot_report(control: &EnsembleOperators, target: &EnsembleOperators) -> Result<GateReport, GateError> {
    let (achieved, steps) = pair_matrix(&cnot_sequence(), control, target, true, None)?;
    let target_matrix = ensemble_cnot_matrix();
    Ok(GateReport {
        fidelity: gate_fidelity(&achieved, &target_matrix)?,
        achieved: to_rows(&achieved),
        target: to_rows(&target_matrix),
        steps,
        low_confidence: false,
        notes: vec![format!(
            "encoding phases chi_control = {:.6}, chi_target = {:.6}",
            control.encoding.chi, target.encoding.chi
        )],
        controlled_phase: None,
    })
}

/// `|Tr(target†·achieved)|² / D²`, clamped to `[0, 1]`.
pub fn gate_fidelity(achieved: &Operator, target: &Operator) -> Result<f64, GateError> {
    if achieved.shape() != target.shape() || achieved.nrows() != achieved.ncols() {
        return Err(GateError::DimensionMismatch {
            expected: target.nrows() * target.ncols(),
            actual: achieved.nrows() * achieved.ncols(),
        });
    }
    let d = achieved.nrows() as f64;
    let overlap: Complex64 = target.adjoint().component_mul(&achieved.transpose()).sum();
    Ok((overlap.norm_sqr() / (d * d)).clamp(0.0, 1.0))
}

/// CNOT from a controlled phase by `π/2` rotations of the target about `y`
/// in opposite senses.
pub fn cz_to_cnot(cz: &Operator) -> Operator {
    let id = Operator::identity(2, 2);
    let before = id.kronecker(&rotation_y(-std::f64::consts::FRAC_PI_2));
    let after = id.kronecker(&rotation_y(std::f64::consts::FRAC_PI_2));
    after * cz * before
}

pub fn controlled_z() -> Operator {
    Operator::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ONE, ONE, -ONE]))
}

/// Final channel amplitudes of one double Förster passage from `r0r1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForsterOutcome {
    /// Amplitudes of the initial channel followed by every other channel.
    pub amplitudes: Vec<Complex64>,
    pub leaked_labels: Vec<String>,
    pub max_margin: f64,
}

pub fn forster_passage(channel: &ForsterChannelParams, grid: &TimeGrid) -> Result<ForsterOutcome, GateError> {
    let model = HamiltonianModel::forster(channel.clone());
    let trajectory = propagate(&model, &CollectiveState::basis_vector(model.dim(), 0), grid)?;
    let max_margin = adiabaticity_margin(&model, grid)?.max();
    Ok(ForsterOutcome {
        amplitudes: trajectory.final_amplitudes().to_vec(),
        leaked_labels: model.labels()[1..].to_vec(),
        max_margin,
    })
}

/// The controlled-phase sequence on two independent single atoms.
pub fn controlled_phase_sequence() -> [GateStep; 5] {
    use GateStepKind::*;
    use RydbergLevel::*;
    [
        GateStep::new(PiPulse(R0), Ensemble::Control),
        GateStep::new(PiPulse(R1), Ensemble::Target),
        GateStep::new(ForsterPassage, Ensemble::Both),
        GateStep::new(ThreePiPulse(R0), Ensemble::Control),
        GateStep::new(ThreePiPulse(R1), Ensemble::Target),
    ]
}

/// Controlled-phase gate from a double Förster passage on `grid`. The
/// snapshots follow `input`; the matrix is assembled from all four logical
/// inputs.
pub fn forster_cz(
    input: [Complex64; 4],
    channel: &ForsterChannelParams,
    grid: &TimeGrid,
) -> Result<GateReport, GateError> {
    check_input(&input)?;
    let outcome = forster_passage(channel, grid)?;
    let atom = EnsembleOperators::idealized(LogicalEncoding::default());
    let sequence = controlled_phase_sequence();
    let (achieved, _) = pair_matrix(&sequence, &atom, &atom, false, Some(&outcome))?;
    let run = run_pair_sequence(&input, &sequence, &atom, &atom, false, Some(&outcome))?;
    let target = controlled_z();
    let phases = [0, 1, 2, 3].map(|k| achieved[(k, k)].arg());
    let entangling_phase = wrap_phase(phases[3] - phases[2] - phases[1] + phases[0]);
    let low_confidence = outcome.max_margin > FORSTER_MARGIN_LIMIT;
    let mut notes = vec![
        "Rydberg excitation by a pi pulse and de-excitation by a 3pi pulse; on a singly excited branch the \
         factors i and -i cancel, a pi de-excitation would leave -1 there and +1 on the doubly excited branch"
            .to_string(),
    ];
    if low_confidence {
        notes.push(format!(
            "adiabaticity margin {:.3} exceeds {FORSTER_MARGIN_LIMIT}",
            outcome.max_margin
        ));
    }
    Ok(GateReport {
        fidelity: gate_fidelity(&achieved, &target)?,
        achieved: to_rows(&achieved),
        target: to_rows(&target),
        steps: run.steps,
        low_confidence,
        notes,
        controlled_phase: Some(ControlledPhaseDiagnostics {
            diagonal_phases: phases,
            entangling_phase,
            population_error: 1.0 - outcome.amplitudes[0].norm_sqr(),
            channel_amplitude: outcome.amplitudes[0],
            max_margin: outcome.max_margin,
            coupling: channel.coupling(),
            distance: channel.distance,
        }),
    })
}

/// Single-excitation scheme scored against its ideal `N_opt`-atom π pulse.
#[derive(Debug, Clone, PartialEq)]
pub enum ExcitationBranch {
    /// Resonant pulse with area `π` for `n_opt` atoms.
    PiPulse,
    Adiabatic(Protocol),
}

/// `1 - sin²((π/2)·√(N/N_opt))`.
pub fn pi_pulse_error(n_atoms: usize, n_opt: usize) -> f64 {
    let s = (0.5 * std::f64::consts::PI * (n_atoms as f64 / n_opt as f64).sqrt()).sin();
    1.0 - s * s
}

/// The π-pulse error obtained by propagating the `√N`-enhanced two-level
/// ensemble through a square pulse of single-atom Rabi frequency `rabi`.
pub fn pi_pulse_error_dynamical(n_atoms: usize, n_opt: usize, rabi: f64, steps_per_us: f64) -> Result<f64, GateError> {
    let area = std::f64::consts::PI / (n_opt as f64).sqrt();
    let pulse = SquarePulse::with_area(rabi, area, 0.0)?;
    let model = HamiltonianModel::ensemble_two_level(n_atoms, Representation::Symmetric, pulse)?;
    let grid = TimeGrid::with_density(pulse.window, steps_per_us)?;
    let trajectory = propagate(&model, &CollectiveState::basis_vector(model.dim(), 0), &grid)?;
    let pops = trajectory.final_populations();
    Ok(1.0 - model.single_rydberg_indices().iter().map(|&k| pops[k]).sum::<f64>())
}

/// Population error `1 - P₁` of one excitation scheme on `n_atoms`.
pub fn pi_pulse_vs_adiabatic_error(
    n_atoms: usize,
    n_opt: usize,
    branch: &ExcitationBranch,
    settings: &ExcitationSettings,
) -> Result<f64, GateError> {
    match branch {
        ExcitationBranch::PiPulse => Ok(pi_pulse_error(n_atoms, n_opt)),
        ExcitationBranch::Adiabatic(protocol) => {
            Ok(1.0 - crate::propagator::run_excitation_probability(n_atoms, protocol, settings)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{NonlinearDetuningPulse, OddPower, Window};
    use crate::units::mhz;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ideal() -> EnsembleOperators {
        EnsembleOperators::idealized(LogicalEncoding::default())
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_rotation_flips_sign_of_one() {
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let run = single_qubit_gate(a, b, 0.0, 0.0, &ideal()).unwrap();
        assert!(close(run.output[0], a, 1e-15));
        assert!(close(run.output[1], -b, 1e-15));
    }

    #[test]
    fn single_qubit_intermediate_states() {
        let (a, b) = (c(0.6, 0.0), c(0.48, 0.64));
        let (theta, phi) = (1.1, 0.4);
        let run = single_qubit_gate(a, b, theta, phi, &ideal()).unwrap();
        let s = &run.steps;
        assert!(close(s[1].amplitude("0"), a, 1e-15) && close(s[1].amplitude("r1"), I * b, 1e-15));
        assert!(close(s[2].amplitude("r0"), a, 1e-15) && close(s[2].amplitude("r1"), I * b, 1e-15));
        let rotated = rotation(theta, phi) * nalgebra::DVector::from_vec(vec![a, b]);
        let (a_out, b_out) = (rotated[0], -rotated[1]);
        assert!(close(s[3].amplitude("r0"), a_out, 1e-15));
        assert!(close(s[3].amplitude("r1"), -I * b_out, 1e-15));
        assert!(close(s[4].amplitude("0"), a_out, 1e-15) && close(s[4].amplitude("r1"), -I * b_out, 1e-15));
        assert!(close(s[5].amplitude("0"), a_out, 1e-15) && close(s[5].amplitude("1"), b_out, 1e-15));
    }

    #[test]
    fn half_rotation_of_pole_gives_equal_weights() {
        let run = single_qubit_gate(ONE, ZERO, FRAC_PI_2, FRAC_PI_2, &ideal()).unwrap();
        assert!((run.output[0].norm_sqr() - 0.5).abs() < 1e-15);
        assert!((run.output[1].norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        assert!(matches!(
            single_qubit_gate(ONE, ONE, 0.0, 0.0, &ideal()),
            Err(GateError::NotNormalized(_))
        ));
    }

    #[test]
    fn cnot_matrix_is_exact() {
        let u = cnot_matrix(&ideal(), &ideal()).unwrap();
        assert_eq!(u, ensemble_cnot_matrix());
        let err = max_deviation(&(u.adjoint() * &u), &Operator::identity(4, 4));
        assert!(err <= 1e-15);
    }

    #[test]
    fn cnot_examples() {
        let run = cnot_gate(logical_basis(0), &ideal(), &ideal()).unwrap();
        assert_eq!(run.output, vec![ZERO, -ONE, ZERO, ZERO]);
        let run = cnot_gate(logical_basis(2), &ideal(), &ideal()).unwrap();
        assert_eq!(run.output, vec![ZERO, ZERO, -I, ZERO]);
    }

    #[test]
    fn cnot_intermediate_states() {
        let (a, b, cc, d) = (c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0));
        let run = cnot_gate([a, b, cc, d], &ideal(), &ideal()).unwrap();
        let s = &run.steps;
        let expect = |k: usize, pairs: &[(&str, Complex64)]| {
            let total: f64 = s[k].components.iter().map(|x| x.amplitude.norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-14);
            for (label, amp) in pairs {
                assert!(close(s[k].amplitude(label), *amp, 1e-15), "step {k} {label}");
            }
        };
        expect(1, &[("0,0", a), ("0,1", b), ("r0,0", I * cc), ("r0,1", I * d)]);
        expect(2, &[("0,0", a), ("0,r1", I * b), ("r0,0", I * cc), ("r0,1", I * d)]);
        expect(3, &[("0,r0", a), ("0,r1", I * b), ("r0,0", I * cc), ("r0,1", I * d)]);
        expect(4, &[("0,r1", I * a), ("0,r0", -b), ("r1,0", -cc), ("r1,1", -d)]);
        expect(5, &[("0,r1", I * a), ("0,0", -b), ("r1,0", -cc), ("r1,1", -d)]);
        expect(6, &[("0,1", -a), ("0,0", -b), ("r1,0", -cc), ("r1,1", -d)]);
        expect(7, &[("0,1", -a), ("0,0", -b), ("1,0", -I * cc), ("1,1", -I * d)]);
    }

    #[test]
    fn fidelity_examples() {
        let t = ensemble_cnot_matrix();
        assert!((gate_fidelity(&t, &t).unwrap() - 1.0).abs() < 1e-15);
        let shifted = &t * Complex64::from_polar(1.0, 0.7);
        assert!((gate_fidelity(&shifted, &t).unwrap() - 1.0).abs() < 1e-15);
        let mut negated = t.clone();
        let col = -negated.column(0).into_owned();
        negated.set_column(0, &col);
        assert!((gate_fidelity(&negated, &t).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            gate_fidelity(&Operator::identity(2, 2), &t),
            Err(GateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cz_conjugated_by_target_rotations_is_cnot() {
        let cnot = cz_to_cnot(&controlled_z());
        let truth = [0, 1, 3, 2];
        for (col, &row) in truth.iter().enumerate() {
            assert!((cnot[(row, col)].norm() - 1.0).abs() < 1e-15 && (cnot[(row, col)] - ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn pi_pulse_closed_form() {
        assert!(pi_pulse_error(5, 5).abs() < 1e-15);
        assert!((pi_pulse_error(4, 5) - 0.027_15).abs() < 1e-4);
        assert!((pi_pulse_error(1, 5) - (1.0 - (0.5 * PI / 5f64.sqrt()).sin().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn dynamical_pi_pulse_reproduces_closed_form() {
        for n in [1, 2, 4, 7] {
            let numeric = pi_pulse_error_dynamical(n, 5, mhz(5.0), 1e6).unwrap();
            assert!((numeric - pi_pulse_error(n, 5)).abs() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn dynamical_pulses_match_ideal_blocks() {
        let pi = resonant_pulse_block(mhz(5.0), 1, 1e5).unwrap();
        let three = resonant_pulse_block(mhz(5.0), 3, 1e5).unwrap();
        let (ip, it) = (ideal_pulse_block(1), ideal_pulse_block(3));
        assert!(pi.iter().zip(ip.iter()).all(|(x, y)| (x - y).norm() < 1e-10));
        assert!(three.iter().zip(it.iter()).all(|(x, y)| (x - y).norm() < 1e-10));
    }

    #[test]
    fn controlled_phase_with_negligible_coupling_is_trivial() {
        let wave = NonlinearDetuningPulse::new(
            0.0,
            vec![-0.3, 0.3],
            mhz(22.6),
            mhz(28800.0),
            OddPower::Quintic,
            Window::new(-0.65, 0.65).unwrap(),
        )
        .unwrap();
        let channel = ForsterChannelParams::with_coupling_at(mhz(152.0), 1e-9, 15.5, wave).unwrap();
        let grid = TimeGrid::new(-0.65, 0.65, 2000).unwrap();
        let input = [c(FRAC_1_SQRT_2, 0.0), ZERO, ZERO, c(0.0, FRAC_1_SQRT_2)];
        let report = forster_cz(input, &channel, &grid).unwrap();
        let diag = report.controlled_phase.unwrap();
        assert!(diag.population_error < 1e-12);
        assert!(diag.entangling_phase.abs() < 1e-9);
        assert!(close(report.achieved[0][0], ONE, 1e-15));
        let last = report.steps.last().unwrap();
        assert!(close(last.amplitude("0,0"), input[0], 1e-15));
    }

    #[test]
    fn report_serializes_complex_pairs() {
        let report = single_qubit_report(PI, 0.0, &ideal()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["achieved"][0][0].as_array().unwrap().len(), 2);
        let back: GateReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
        assert!((report.fidelity - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn single_qubit_preserves_norm(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, w in -1.0f64..1.0,
                                       theta in 0.0f64..TAU_F, phi in 0.0f64..TAU_F) {
            let n = (x * x + y * y + z * z + w * w).sqrt();
            prop_assume!(n > 1e-3);
            let (a, b) = (c(x / n, y / n), c(z / n, w / n));
            let run = single_qubit_gate(a, b, theta, phi, &ideal()).unwrap();
            let norm: f64 = run.output.iter().map(Complex64::norm_sqr).sum();
            prop_assert!((norm - 1.0).abs() < 1e-14);
            prop_assert!(run.leakage < 1e-28);
            let rotated = rotation(theta, phi) * nalgebra::DVector::from_vec(vec![a, b]);
            prop_assert!(close(run.output[0], rotated[0], 1e-14) && close(run.output[1], -rotated[1], 1e-14));
        }

        #[test]
        fn cnot_ignores_encoding_phases(chi_c in -10.0f64..10.0, chi_t in -10.0f64..10.0) {
            let control = EnsembleOperators::idealized(LogicalEncoding::new(chi_c));
            let target = EnsembleOperators::idealized(LogicalEncoding::new(chi_t));
            let u = cnot_matrix(&control, &target).unwrap();
            prop_assert!(max_deviation(&u, &ensemble_cnot_matrix()) < 1e-15);
        }
    }

    const TAU_F: f64 = std::f64::consts::TAU;
}
