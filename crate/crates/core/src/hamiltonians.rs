//! Instantaneous Hamiltonians of every model, with ħ = 1.
//!
//! Each model is stored as a short linear combination `H(t) = Σ c_k(t)·A_k`
//! of constant sparse real symmetric operators, with the coefficients read off
//! the drive at time `t`. The same representation serves dense matrix
//! construction (for eigen-solves) and fast matrix-vector products (for
//! propagation).

use nalgebra::{DMatrix, Matrix2, Matrix3};
use num_complex::Complex64;
use thiserror::Error;

use crate::pulses::{NonlinearDetuningPulse, StirapPulse, ThreeLevelDrive, TwoLevelDrive, TwoLevelPulse, Window};
use crate::statespace::{BasisState, BlockadedBasis, Level, LevelScheme, Representation, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("interaction distance must be positive, got {0} µm")]
    NonPositiveDistance(f64),
    #[error("dipole-dipole coefficient must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    ArpTwoLevel,
    StirapThreeLevel,
    EnsembleTwoLevel,
    EnsembleThreeLevelFull,
    EnsembleThreeLevelSymmetric,
    ForsterChannel,
}

/// An extra pair state weakly coupled to the initial Förster channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectatorChannel {
    /// Energy offset relative to the resonant channel, rad/µs.
    pub offset: f64,
    /// Coupling to the initial channel in units of the primary coupling.
    pub relative_coupling: f64,
}

/// Effective two-channel model of a Stark-tuned Förster resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct ForsterChannelParams {
    /// Energy defect at zero electric field, rad/µs. Reported only.
    pub defect_at_zero_field: f64,
    /// Dipole-dipole coefficient `C3`, rad·µm³/µs.
    pub coupling_coefficient: f64,
    /// Interatomic distance, µm.
    pub distance: f64,
    /// Field-tuned defect `δ_F(t)`; its Rabi frequency is ignored.
    pub detuning_waveform: NonlinearDetuningPulse,
    /// Off-resonant channels; empty by default.
    pub spectators: Vec<SpectatorChannel>,
}

impl ForsterChannelParams {
    pub fn new(
        defect_at_zero_field: f64,
        coupling_coefficient: f64,
        distance: f64,
        detuning_waveform: NonlinearDetuningPulse,
    ) -> Result<Self, HamiltonianError> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(HamiltonianError::NonPositiveDistance(distance));
        }
        if !(coupling_coefficient.is_finite() && coupling_coefficient > 0.0) {
            return Err(HamiltonianError::NonPositiveCoupling(coupling_coefficient));
        }
        Ok(Self {
            defect_at_zero_field,
            coupling_coefficient,
            distance,
            detuning_waveform,
            spectators: Vec::new(),
        })
    }

    /// Chooses `C3` so that the coupling at `distance` equals `coupling`.
    pub fn with_coupling_at(
        defect_at_zero_field: f64,
        coupling: f64,
        distance: f64,
        detuning_waveform: NonlinearDetuningPulse,
    ) -> Result<Self, HamiltonianError> {
        Self::new(
            defect_at_zero_field,
            coupling * distance.powi(3),
            distance,
            detuning_waveform,
        )
    }

    /// `V = C3 / R³`.
    pub fn coupling(&self) -> f64 {
        self.coupling_coefficient / self.distance.powi(3)
    }

    pub fn at_distance(&self, distance: f64) -> Result<Self, HamiltonianError> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(HamiltonianError::NonPositiveDistance(distance));
        }
        Ok(Self {
            distance,
            ..self.clone()
        })
    }

    pub fn defect(&self, t: f64) -> f64 {
        self.detuning_waveform.detuning(t)
    }
}

/// The time-dependent inputs of a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    TwoLevel(TwoLevelPulse),
    ThreeLevel(StirapPulse),
    Forster(ForsterChannelParams),
}

/// Effective two-level parameters `(Ω₀, δ, dΩ₀/dt, dδ/dt)` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParameters {
    pub rabi: f64,
    pub detuning: f64,
    pub rabi_rate: f64,
    pub detuning_rate: f64,
}

/// Real symmetric sparse matrix stored as a list of nonzero entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSymmetric {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSymmetric {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn add_pair(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            self.entries.push((i, i, value));
        } else {
            self.entries.push((i, j, value));
            self.entries.push((j, i, value));
        }
    }

    pub fn add_diagonal(&mut self, i: usize, value: f64) {
        self.entries.push((i, i, value));
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    row: usize,
    col: usize,
    term: usize,
    value: f64,
}

/// A Hamiltonian rule: time and drive in, real symmetric matrix out.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    kind: ModelKind,
    drive: Drive,
    basis: Option<BlockadedBasis>,
    labels: Vec<String>,
    n_atoms: usize,
    dim: usize,
    entries: Vec<Entry>,
}

impl HamiltonianModel {
    fn assemble(
        kind: ModelKind,
        drive: Drive,
        basis: Option<BlockadedBasis>,
        labels: Vec<String>,
        n_atoms: usize,
        terms: &[SparseSymmetric],
    ) -> Self {
        let dim = labels.len();
        let entries = terms
            .iter()
            .enumerate()
            .flat_map(|(term, op)| {
                op.entries
                    .iter()
                    .map(move |&(row, col, value)| Entry { row, col, term, value })
            })
            .collect();
        Self {
            kind,
            drive,
            basis,
            labels,
            n_atoms,
            dim,
            entries,
        }
    }

    /// Single two-level atom.
    pub fn arp(pulse: impl Into<TwoLevelPulse>) -> Self {
        let (coupling, diagonal) = two_level_terms(1);
        Self::assemble(
            ModelKind::ArpTwoLevel,
            Drive::TwoLevel(pulse.into()),
            None,
            vec!["g".into(), "r".into()],
            1,
            &[coupling, diagonal],
        )
    }

    /// Single three-level ladder atom.
    pub fn stirap(pulse: impl Into<StirapPulse>) -> Self {
        let basis =
            BlockadedBasis::new(1, LevelScheme::ThreeLevel, Representation::Full).expect("one atom is within capacity");
        let terms = three_level_terms(&basis);
        Self::assemble(
            ModelKind::StirapThreeLevel,
            Drive::ThreeLevel(pulse.into()),
            None,
            basis.labels(),
            1,
            &terms,
        )
    }

    /// N blockaded two-level atoms. The ground manifold sits at `-δ/2` and
    /// every single-excitation state at `+δ/2`, so the symmetric
    /// representation is the √N-enhanced two-level matrix.
    pub fn ensemble_two_level(
        n_atoms: usize,
        representation: Representation,
        pulse: impl Into<TwoLevelPulse>,
    ) -> Result<Self, HamiltonianError> {
        let basis = BlockadedBasis::new(n_atoms, LevelScheme::TwoLevel, representation)?;
        let (coupling, diagonal) = match representation {
            Representation::Symmetric => two_level_terms(n_atoms),
            Representation::Full => {
                let mut coupling = SparseSymmetric::new(basis.dim());
                let mut diagonal = SparseSymmetric::new(basis.dim());
                diagonal.add_diagonal(0, -1.0);
                for k in basis.single_rydberg_indices() {
                    coupling.add_pair(0, k, 1.0);
                    diagonal.add_diagonal(k, 1.0);
                }
                (coupling, diagonal)
            }
        };
        Ok(Self::assemble(
            ModelKind::EnsembleTwoLevel,
            Drive::TwoLevel(pulse.into()),
            Some(basis.clone()),
            basis.labels(),
            n_atoms,
            &[coupling, diagonal],
        ))
    }

    /// N blockaded three-level atoms driven by a pump/Stokes pair.
    pub fn ensemble_three_level(
        n_atoms: usize,
        representation: Representation,
        pulse: impl Into<StirapPulse>,
    ) -> Result<Self, HamiltonianError> {
        let basis = BlockadedBasis::new(n_atoms, LevelScheme::ThreeLevel, representation)?;
        let terms = three_level_terms(&basis);
        let kind = match representation {
            Representation::Full => ModelKind::EnsembleThreeLevelFull,
            Representation::Symmetric => ModelKind::EnsembleThreeLevelSymmetric,
        };
        Ok(Self::assemble(
            kind,
            Drive::ThreeLevel(pulse.into()),
            Some(basis.clone()),
            basis.labels(),
            n_atoms,
            &terms,
        ))
    }

    /// Initial channel (index 0) coupled to the field-tuned channel (index 1)
    /// and to any spectator channels.
    pub fn forster(params: ForsterChannelParams) -> Self {
        let dim = 2 + params.spectators.len();
        let mut coupling = SparseSymmetric::new(dim);
        let mut defect = SparseSymmetric::new(dim);
        let mut offsets = SparseSymmetric::new(dim);
        coupling.add_pair(0, 1, 1.0);
        defect.add_diagonal(1, 1.0);
        let mut labels = vec!["r0r1".to_string(), "r2r3".to_string()];
        for (k, s) in params.spectators.iter().enumerate() {
            let idx = 2 + k;
            coupling.add_pair(0, idx, s.relative_coupling);
            defect.add_diagonal(idx, 1.0);
            offsets.add_diagonal(idx, s.offset);
            labels.push(format!("spectator{}", k + 1));
        }
        Self::assemble(
            ModelKind::ForsterChannel,
            Drive::Forster(params),
            None,
            labels,
            2,
            &[coupling, defect, SparseSymmetric::new(dim), offsets],
        )
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn drive(&self) -> &Drive {
        &self.drive
    }

    pub fn basis(&self) -> Option<&BlockadedBasis> {
        self.basis.as_ref()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// Indices of basis states with exactly one Rydberg excitation.
    pub fn single_rydberg_indices(&self) -> Vec<usize> {
        match (&self.basis, self.kind) {
            (Some(b), _) => b.single_rydberg_indices(),
            (None, ModelKind::ArpTwoLevel) => vec![1],
            (None, ModelKind::StirapThreeLevel) => vec![2],
            (None, _) => Vec::new(),
        }
    }

    /// Natural time window of the drive.
    pub fn support(&self) -> Window {
        match &self.drive {
            Drive::TwoLevel(p) => p.support(),
            Drive::ThreeLevel(p) => p.support(),
            Drive::Forster(p) => p.detuning_waveform.support(),
        }
    }

    /// Times at which the Hamiltonian jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut points = match &self.drive {
            Drive::TwoLevel(p) => p.breakpoints(),
            Drive::ThreeLevel(p) => p.breakpoints(),
            Drive::Forster(p) => p.detuning_waveform.breakpoints(),
        };
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    fn coefficients(&self, t: f64) -> [f64; 4] {
        match &self.drive {
            Drive::TwoLevel(p) => [0.5 * p.rabi(t), 0.5 * p.detuning(t), 0.0, 1.0],
            Drive::ThreeLevel(p) => [0.5 * p.pump(t), 0.5 * p.stokes(t), p.detuning(t), 1.0],
            Drive::Forster(p) => [p.coupling(), p.defect(t), 0.0, 1.0],
        }
    }

    /// Effective two-level parameters, for models equivalent to a driven
    /// two-level system.
    pub fn two_level_parameters(&self, t: f64) -> Option<TwoLevelParameters> {
        match &self.drive {
            Drive::TwoLevel(p) => {
                let enhancement = (self.n_atoms as f64).sqrt();
                Some(TwoLevelParameters {
                    rabi: enhancement * p.rabi(t),
                    detuning: p.detuning(t),
                    rabi_rate: enhancement * p.rabi_rate(t),
                    detuning_rate: p.detuning_rate(t),
                })
            }
            Drive::Forster(p) => Some(TwoLevelParameters {
                rabi: 2.0 * p.coupling(),
                detuning: p.defect(t),
                rabi_rate: 0.0,
                detuning_rate: p.detuning_waveform.detuning_rate(t),
            }),
            Drive::ThreeLevel(_) => None,
        }
    }

    /// Dense matrix at time `t`.
    pub fn matrix(&self, t: f64) -> DMatrix<f64> {
        let c = self.coefficients(t);
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            m[(e.row, e.col)] += c[e.term] * e.value;
        }
        m
    }

    /// `out = H(t)·psi`.
    pub fn apply(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let c = self.coefficients(t);
        out.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for e in &self.entries {
            out[e.row] += psi[e.col] * (c[e.term] * e.value);
        }
    }
}

fn two_level_terms(n_atoms: usize) -> (SparseSymmetric, SparseSymmetric) {
    let mut coupling = SparseSymmetric::new(2);
    coupling.add_pair(0, 1, (n_atoms as f64).sqrt());
    let mut diagonal = SparseSymmetric::new(2);
    diagonal.add_diagonal(0, -1.0);
    diagonal.add_diagonal(1, 1.0);
    (coupling, diagonal)
}

/// Pump (g↔e), Stokes (e↔r) and intermediate-detuning operators.
fn three_level_terms(basis: &BlockadedBasis) -> [SparseSymmetric; 3] {
    let dim = basis.dim();
    let mut pump = SparseSymmetric::new(dim);
    let mut stokes = SparseSymmetric::new(dim);
    let mut detuning = SparseSymmetric::new(dim);
    for (i, state) in basis.states().iter().enumerate() {
        match state {
            BasisState::Product(levels) => {
                let has_rydberg = levels.iter().any(|l| l.is_rydberg());
                for (atom, &level) in levels.iter().enumerate() {
                    let raised = match level {
                        Level::Ground => Some((Level::Intermediate, &mut pump)),
                        Level::Intermediate if !has_rydberg => Some((Level::Rydberg, &mut stokes)),
                        _ => None,
                    };
                    if let Some((next, op)) = raised {
                        let mut target = levels.clone();
                        target[atom] = next;
                        let j = basis
                            .index_of(&BasisState::Product(target))
                            .expect("raised state is blockade-allowed");
                        op.add_pair(i, j, 1.0);
                    }
                }
            }
            BasisState::Symmetric(occ) => {
                let mut up_pump = *occ;
                if occ.ground > 0 {
                    up_pump.ground -= 1;
                    up_pump.intermediate += 1;
                    let j = basis.index_of(&BasisState::Symmetric(up_pump)).expect("allowed");
                    pump.add_pair(i, j, ((occ.ground * (occ.intermediate + 1)) as f64).sqrt());
                }
                if occ.intermediate > 0 && occ.rydberg == 0 {
                    let mut up = *occ;
                    up.intermediate -= 1;
                    up.rydberg += 1;
                    let j = basis.index_of(&BasisState::Symmetric(up)).expect("allowed");
                    stokes.add_pair(i, j, ((occ.intermediate * (occ.rydberg + 1)) as f64).sqrt());
                }
            }
        }
        let n_e = state.occupation().intermediate;
        if n_e > 0 {
            detuning.add_diagonal(i, n_e as f64);
        }
    }
    [pump, stokes, detuning]
}

/// Two-level matrix `(1/2)[[-δ, Ω₀], [Ω₀, δ]]`.
pub fn h_arp(pulse: &impl TwoLevelDrive, t: f64) -> Matrix2<f64> {
    let (rabi, detuning) = (pulse.rabi(t), pulse.detuning(t));
    0.5 * Matrix2::new(-detuning, rabi, rabi, detuning)
}

/// Three-level ladder matrix `(1/2)[[0, Ω_P, 0], [Ω_P, 2δ, Ω_S], [0, Ω_S, 0]]`.
pub fn h_stirap(pulse: &impl ThreeLevelDrive, t: f64) -> Matrix3<f64> {
    let (p, s, d) = (pulse.pump(t), pulse.stokes(t), pulse.detuning(t));
    0.5 * Matrix3::new(0.0, p, 0.0, p, 2.0 * d, s, 0.0, s, 0.0)
}

/// √N-enhanced collective two-level matrix.
pub fn h_two_level_ensemble(n_atoms: usize, pulse: &impl TwoLevelDrive, t: f64) -> Matrix2<f64> {
    let coupling = (n_atoms as f64).sqrt() * pulse.rabi(t);
    let detuning = pulse.detuning(t);
    0.5 * Matrix2::new(-detuning, coupling, coupling, detuning)
}

/// Blockaded N-atom three-level matrix on `basis`.
pub fn h_ensemble(basis: &BlockadedBasis, pulse: &impl ThreeLevelDrive, t: f64) -> DMatrix<f64> {
    let [pump, stokes, detuning] = three_level_terms(basis);
    pump.to_dense() * (0.5 * pulse.pump(t))
        + stokes.to_dense() * (0.5 * pulse.stokes(t))
        + detuning.to_dense() * pulse.detuning(t)
}

/// Two-channel Förster matrix `[[0, V], [V, δ_F(t)]]`.
pub fn h_forster(params: &ForsterChannelParams, t: f64) -> Matrix2<f64> {
    let v = params.coupling();
    Matrix2::new(0.0, v, v, params.defect(t))
}
