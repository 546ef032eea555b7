//! Integration of `i·dψ/dt = H(t)·ψ`, eigenvalue tracking and phase
//! extraction.
//!
//! The integrator is classic fourth-order Runge-Kutta on a grid that always
//! contains the Hamiltonian's discontinuities as nodes. Stages that touch the
//! right end of a segment evaluate `H` just below the node, so a jump at a
//! node is never sampled from the wrong side. An optional step-doubling mode
//! adapts the step within each segment.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::hamiltonians::{HamiltonianError, HamiltonianModel};
use crate::parallel::{self, Execution};
use crate::pulses::{StirapPulse, TwoLevelPulse, Window};
use crate::statespace::{CollectiveState, Representation};

/// Default integration density, steps per µs.
pub const DEFAULT_STEPS_PER_US: f64 = 1e4;
/// Phases of components with population below this floor are masked.
pub const PHASE_POPULATION_FLOOR: f64 = 1e-6;
/// Default upper bound on the number of recorded samples.
pub const DEFAULT_MAX_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("initial state has dimension {actual}, model needs {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("initial state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("adaptive step size underflow at t = {t} µs")]
    StepUnderflow { t: f64 },
    #[error("eigen-tracking supports dimension up to 64, got {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Model(#[from] HamiltonianError),
}

/// Integration interval and step control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub adaptive: bool,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Record one sample every this many steps (the final node is always kept).
    pub record_every: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self, PropagationError> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(PropagationError::InvalidGrid(format!(
                "need t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps < 2 {
            return Err(PropagationError::InvalidGrid(format!(
                "need at least 2 steps, got {n_steps}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            n_steps,
            adaptive: false,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            record_every: n_steps.div_ceil(DEFAULT_MAX_SAMPLES).max(1),
        })
    }

    /// Grid over `window` with the given number of steps per µs.
    pub fn with_density(window: Window, steps_per_us: f64) -> Result<Self, PropagationError> {
        if !(steps_per_us.is_finite() && steps_per_us > 0.0) {
            return Err(PropagationError::InvalidGrid(format!(
                "steps per µs must be positive, got {steps_per_us}"
            )));
        }
        let n = (window.duration() * steps_per_us).ceil().max(2.0) as usize;
        Self::new(window.start, window.end, n)
    }

    pub fn with_adaptive(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.adaptive = true;
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn nominal_step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn window(&self) -> Window {
        Window {
            start: self.t_start,
            end: self.t_end,
        }
    }

    /// Segment edges: the window ends plus every interior breakpoint.
    pub fn segment_edges(&self, breakpoints: &[f64]) -> Vec<f64> {
        let mut edges = vec![self.t_start];
        let mut interior: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > self.t_start && b < self.t_end)
            .collect();
        interior.sort_by(f64::total_cmp);
        interior.dedup();
        edges.extend(interior);
        edges.push(self.t_end);
        edges
    }

    /// Fixed-step integration nodes, uniform within each segment.
    pub fn nodes(&self, breakpoints: &[f64]) -> Vec<f64> {
        let h = self.nominal_step();
        let edges = self.segment_edges(breakpoints);
        let mut nodes = vec![self.t_start];
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let steps = ((b - a) / h).round().max(1.0) as usize;
            let dt = (b - a) / steps as f64;
            nodes.extend((1..steps).map(|k| a + k as f64 * dt));
            nodes.push(b);
        }
        nodes
    }
}

/// Sampled solution of a propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub amplitudes: Vec<Vec<Complex64>>,
    pub populations: Vec<Vec<f64>>,
    /// Unwrapped phases; `NaN` where the population is below the floor.
    pub phases: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

impl Trajectory {
    fn from_samples(labels: Vec<String>, times: Vec<f64>, amplitudes: Vec<Vec<Complex64>>) -> Self {
        let populations: Vec<Vec<f64>> = amplitudes
            .iter()
            .map(|row| row.iter().map(Complex64::norm_sqr).collect())
            .collect();
        let norms = populations.iter().map(|row| row.iter().sum::<f64>().sqrt()).collect();
        let dim = labels.len();
        let columns: Vec<Vec<f64>> = (0..dim)
            .map(|k| unwrap_masked(amplitudes.iter().map(|row| row[k])))
            .collect();
        let phases = (0..times.len())
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        Self {
            labels,
            times,
            amplitudes,
            populations,
            phases,
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn final_amplitudes(&self) -> &[Complex64] {
        self.amplitudes.last().expect("trajectory has at least two samples")
    }

    pub fn final_state(&self) -> CollectiveState {
        CollectiveState::new(self.final_amplitudes().to_vec())
    }

    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("trajectory has at least two samples")
    }

    /// Population time series of one basis state.
    pub fn population(&self, index: usize) -> Vec<f64> {
        self.populations.iter().map(|row| row[index]).collect()
    }

    /// Largest deviation of the norm from 1.
    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Wrapped `arg` of the final amplitude of `index`.
    pub fn final_phase(&self, index: usize) -> f64 {
        self.final_amplitudes()[index].arg()
    }
}

fn unwrap_masked(values: impl Iterator<Item = Complex64>) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::new();
    let mut last: Option<f64> = None;
    for a in values {
        if a.norm_sqr() < PHASE_POPULATION_FLOOR {
            out.push(f64::NAN);
            continue;
        }
        let raw = a.arg();
        let phase = match last {
            None => raw,
            Some(prev) => {
                let mut p = raw + TAU * ((prev - raw) / TAU).round();
                while p - prev > PI {
                    p -= TAU;
                }
                while p - prev < -PI {
                    p += TAU;
                }
                p
            }
        };
        last = Some(phase);
        out.push(phase);
    }
    out
}

/// Unwrapped phase of one component; masked samples are `NaN`.
pub fn extract_phase(trajectory: &Trajectory, index: usize) -> Vec<f64> {
    unwrap_masked(trajectory.amplitudes.iter().map(|row| row[index]))
}

struct Stepper<'a> {
    model: &'a HamiltonianModel,
    k: [Vec<Complex64>; 4],
    work: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a HamiltonianModel) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); model.dim()];
        Self {
            model,
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            work: zero,
        }
    }

    /// Writes `-i·H(t)·psi` into `out`.
    fn derivative(model: &HamiltonianModel, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        model.apply(t, psi, out);
        for x in out.iter_mut() {
            *x = Complex64::new(x.im, -x.re);
        }
    }

    /// One RK4 step from `t` to `t + h`; `t_right` is the time used for the
    /// final stage, which may sit just below a segment edge.
    fn step(&mut self, t: f64, h: f64, t_right: f64, psi: &mut [Complex64]) {
        let t_mid = t + 0.5 * h;
        let [k1, k2, k3, k4] = &mut self.k;
        Self::derivative(self.model, t, psi, k1);
        for ((w, p), k) in self.work.iter_mut().zip(psi.iter()).zip(k1.iter()) {
            *w = p + k * (0.5 * h);
        }
        Self::derivative(self.model, t_mid, &self.work, k2);
        for ((w, p), k) in self.work.iter_mut().zip(psi.iter()).zip(k2.iter()) {
            *w = p + k * (0.5 * h);
        }
        Self::derivative(self.model, t_mid, &self.work, k3);
        for ((w, p), k) in self.work.iter_mut().zip(psi.iter()).zip(k3.iter()) {
            *w = p + k * h;
        }
        Self::derivative(self.model, t_right, &self.work, k4);
        let sixth = h / 6.0;
        for (i, p) in psi.iter_mut().enumerate() {
            *p += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * sixth;
        }
    }
}

fn left_limit(edge: f64) -> f64 {
    edge.next_down()
}

/// Propagates `psi0` over `grid` under `model`.
pub fn propagate(
    model: &HamiltonianModel,
    psi0: &CollectiveState,
    grid: &TimeGrid,
) -> Result<Trajectory, PropagationError> {
    if psi0.dim() != model.dim() {
        return Err(PropagationError::DimensionMismatch {
            expected: model.dim(),
            actual: psi0.dim(),
        });
    }
    if !psi0.is_normalized() {
        return Err(PropagationError::NotNormalized(psi0.norm_sqr()));
    }
    let breakpoints = model.breakpoints();
    let mut psi = psi0.amplitudes.clone();
    let mut stepper = Stepper::new(model);
    let mut times = vec![grid.t_start];
    let mut samples = vec![psi.clone()];
    let mut count = 0usize;
    let mut record = |t: f64, psi: &[Complex64], last: bool| {
        count += 1;
        if last || count.is_multiple_of(grid.record_every) {
            times.push(t);
            samples.push(psi.to_vec());
        }
    };

    if grid.adaptive {
        let edges = grid.segment_edges(&breakpoints);
        let mut h = grid.nominal_step();
        let mut half = vec![Complex64::new(0.0, 0.0); psi.len()];
        let mut full = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (seg, pair) in edges.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let last_segment = seg + 2 == edges.len();
            let mut t = a;
            while t < b {
                let reaches_edge = t + h >= b;
                let step = if reaches_edge { b - t } else { h };
                let t_next = if reaches_edge { b } else { t + step };
                let right = if reaches_edge { left_limit(b) } else { t_next };
                full.copy_from_slice(&psi);
                stepper.step(t, step, right, &mut full);
                half.copy_from_slice(&psi);
                let mid = t + 0.5 * step;
                stepper.step(t, 0.5 * step, mid, &mut half);
                stepper.step(mid, 0.5 * step, right, &mut half);
                let err = half.iter().zip(&full).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / 15.0;
                let scale = half.iter().map(|x| x.norm()).fold(0.0, f64::max);
                let tol = grid.abs_tol + grid.rel_tol * scale;
                if err <= tol {
                    psi.copy_from_slice(&half);
                    t = t_next;
                    record(t, &psi, last_segment && reaches_edge);
                }
                let factor = if err == 0.0 {
                    4.0
                } else {
                    (0.9 * (tol / err).powf(0.2)).clamp(0.2, 4.0)
                };
                h = step * factor;
                if h < 1e-13 * (1.0 + t.abs()) {
                    return Err(PropagationError::StepUnderflow { t });
                }
            }
        }
    } else {
        let nodes = grid.nodes(&breakpoints);
        let edges = grid.segment_edges(&breakpoints);
        let mut edge_iter = edges.iter().skip(1).peekable();
        for (i, pair) in nodes.windows(2).enumerate() {
            let (t, t_next) = (pair[0], pair[1]);
            let at_edge = edge_iter.peek().is_some_and(|&&e| e == t_next);
            if at_edge {
                edge_iter.next();
            }
            let right = if at_edge { left_limit(t_next) } else { t_next };
            stepper.step(t, t_next - t, right, &mut psi);
            record(t_next, &psi, i + 2 == nodes.len());
        }
    }
    Ok(Trajectory::from_samples(model.labels().to_vec(), times, samples))
}

/// Instantaneous eigenvalues ordered for continuity in time.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTrack {
    pub times: Vec<f64>,
    /// `eigenvalues[i][k]` is trace `k` at `times[i]`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Trace holding the initial state at the first time.
    pub initial_state_branch: usize,
    /// Time indices where matching was ambiguous and traces were value-sorted.
    pub ambiguous: Vec<usize>,
    /// Spectral norm of `H` at each time.
    pub spectral_norms: Vec<f64>,
    /// Eigenvector of the initial-state trace at each time, with its sign
    /// fixed by continuity.
    pub branch_vectors: Vec<Vec<f64>>,
}

impl EigenTrack {
    pub fn trace(&self, k: usize) -> Vec<f64> {
        self.eigenvalues.iter().map(|row| row[k]).collect()
    }

    pub fn initial_branch(&self) -> Vec<f64> {
        self.trace(self.initial_state_branch)
    }

    /// Largest jump of any trace per unit time between adjacent samples.
    pub fn max_slope(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            for (a, b) in self.eigenvalues[i].iter().zip(&self.eigenvalues[i - 1]) {
                worst = worst.max((a - b).abs() / dt);
            }
        }
        worst
    }

    pub fn is_continuous(&self, slope_limit: f64) -> bool {
        self.max_slope() <= slope_limit
    }

    /// A trace whose magnitude stays below `rel_tol·‖H‖` at every sample.
    pub fn zero_branch(&self, rel_tol: f64) -> Option<usize> {
        let dim = self.eigenvalues.first().map_or(0, Vec::len);
        (0..dim).find(|&k| {
            self.eigenvalues
                .iter()
                .zip(&self.spectral_norms)
                .all(|(row, norm)| row[k].abs() <= rel_tol * norm)
        })
    }
}

/// Minimum overlap with the previous eigenvector for an unambiguous match.
const MATCH_OVERLAP: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Tracks eigenvalues of `model` at the given times.
pub fn eigen_track_at(
    model: &HamiltonianModel,
    times: &[f64],
    initial: &CollectiveState,
) -> Result<EigenTrack, PropagationError> {
    let dim = model.dim();
    if dim > 64 {
        return Err(PropagationError::TooLarge(dim));
    }
    if initial.dim() != dim {
        return Err(PropagationError::DimensionMismatch {
            expected: dim,
            actual: initial.dim(),
        });
    }
    if times.len() < 2 {
        return Err(PropagationError::InvalidGrid("need at least two times".into()));
    }
    let mut eigenvalues = Vec::with_capacity(times.len());
    let mut spectral_norms = Vec::with_capacity(times.len());
    let mut ambiguous = Vec::new();

    let (values, mut tracked) = sorted_eigen(model.matrix(times[0]));
    spectral_norms.push(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let initial_state_branch = (0..dim)
        .map(|k| {
            let overlap: Complex64 = (0..dim).map(|i| initial.amplitudes[i] * tracked[(i, k)]).sum();
            (k, overlap.norm_sqr())
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    eigenvalues.push(values);
    let mut branch_vectors = Vec::with_capacity(times.len());
    branch_vectors.push(tracked.column(initial_state_branch).iter().copied().collect());

    for (i, &t) in times.iter().enumerate().skip(1) {
        let (values, vectors) = sorted_eigen(model.matrix(t));
        spectral_norms.push(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let overlaps = (tracked.transpose() * &vectors).map(f64::abs);
        let mut pairs: Vec<(usize, usize, f64)> = (0..dim)
            .flat_map(|a| (0..dim).map(move |b| (a, b)))
            .map(|(a, b)| (a, b, overlaps[(a, b)]))
            .collect();
        pairs.sort_by(|x, y| y.2.total_cmp(&x.2));
        let mut assignment = vec![usize::MAX; dim];
        let mut taken = vec![false; dim];
        let mut weakest = f64::INFINITY;
        for (trace, candidate, overlap) in pairs {
            if assignment[trace] == usize::MAX && !taken[candidate] {
                assignment[trace] = candidate;
                taken[candidate] = true;
                weakest = weakest.min(overlap);
            }
        }
        if weakest < MATCH_OVERLAP {
            ambiguous.push(i);
            assignment = (0..dim).collect();
        }
        let mut next = DMatrix::zeros(dim, dim);
        let mut row = vec![0.0; dim];
        for (trace, &candidate) in assignment.iter().enumerate() {
            row[trace] = values[candidate];
            let mut column = vectors.column(candidate).into_owned();
            if tracked.column(trace).dot(&column) < 0.0 {
                column = -column;
            }
            next.set_column(trace, &column);
        }
        tracked = next;
        branch_vectors.push(tracked.column(initial_state_branch).iter().copied().collect());
        eigenvalues.push(row);
    }

    Ok(EigenTrack {
        times: times.to_vec(),
        eigenvalues,
        initial_state_branch,
        ambiguous,
        spectral_norms,
        branch_vectors,
    })
}

/// Tracks eigenvalues on the integration nodes of `grid`. Every interior
/// breakpoint is preceded by a sample just below it, so jumps appear as
/// zero-width steps in the traces.
pub fn eigen_track(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    initial: &CollectiveState,
) -> Result<EigenTrack, PropagationError> {
    let breakpoints = model.breakpoints();
    let edges = grid.segment_edges(&breakpoints);
    let interior = &edges[1..edges.len() - 1];
    let mut times = Vec::new();
    for t in grid.nodes(&breakpoints) {
        if interior.contains(&t) {
            times.push(left_limit(t));
        }
        times.push(t);
    }
    eigen_track_at(model, &times, initial)
}

/// Excitation protocol applied to every atom of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    Arp(TwoLevelPulse),
    Stirap(StirapPulse),
}

impl Protocol {
    pub fn model(&self, n_atoms: usize, representation: Representation) -> Result<HamiltonianModel, PropagationError> {
        Ok(match self {
            Protocol::Arp(p) => HamiltonianModel::ensemble_two_level(n_atoms, representation, p.clone())?,
            Protocol::Stirap(p) => HamiltonianModel::ensemble_three_level(n_atoms, representation, p.clone())?,
        })
    }

    pub fn support(&self) -> Window {
        use crate::pulses::{ThreeLevelDrive, TwoLevelDrive};
        match self {
            Protocol::Arp(p) => p.support(),
            Protocol::Stirap(p) => p.support(),
        }
    }
}

/// Numerical settings for ensemble excitation runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSettings {
    pub representation: Representation,
    pub steps_per_us: f64,
    /// Overrides the drive's support window when set.
    pub window: Option<Window>,
}

impl Default for ExcitationSettings {
    fn default() -> Self {
        Self {
            representation: Representation::Symmetric,
            steps_per_us: DEFAULT_STEPS_PER_US,
            window: None,
        }
    }
}

/// Propagates the collective ground state of `n_atoms` through `protocol`.
pub fn run_ensemble(
    n_atoms: usize,
    protocol: &Protocol,
    settings: &ExcitationSettings,
) -> Result<(HamiltonianModel, Trajectory), PropagationError> {
    let model = protocol.model(n_atoms, settings.representation)?;
    let window = settings.window.unwrap_or_else(|| protocol.support());
    let grid = TimeGrid::with_density(window, settings.steps_per_us)?;
    let psi0 = CollectiveState::basis_vector(model.dim(), 0);
    let trajectory = propagate(&model, &psi0, &grid)?;
    Ok((model, trajectory))
}

/// Final probability of exactly one Rydberg excitation.
pub fn run_excitation_probability(
    n_atoms: usize,
    protocol: &Protocol,
    settings: &ExcitationSettings,
) -> Result<f64, PropagationError> {
    let (model, trajectory) = run_ensemble(n_atoms, protocol, settings)?;
    let pops = trajectory.final_populations();
    Ok(model.single_rydberg_indices().iter().map(|&k| pops[k]).sum())
}

/// [`run_excitation_probability`] for several ensemble sizes.
pub fn excitation_table(
    atom_counts: &[usize],
    protocol: &Protocol,
    settings: &ExcitationSettings,
    execution: Execution,
) -> Vec<Result<f64, PropagationError>> {
    parallel::map(execution, atom_counts, |&n| {
        run_excitation_probability(n, protocol, settings)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{GaussianChirpPulse, SquarePulse, StirapPair, TwoLevelDrive};
    use crate::statespace::{project_to_symmetric, BlockadedBasis, LevelScheme};
    use crate::units::mhz;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2() -> GaussianChirpPulse {
        GaussianChirpPulse::new(mhz(5.0), 1.0, 0.0, mhz(-1.0)).unwrap()
    }

    #[test]
    fn breakpoints_become_nodes() {
        let grid = TimeGrid::new(-1.0, 1.0, 10).unwrap();
        let nodes = grid.nodes(&[0.05, 5.0]);
        assert!(nodes.contains(&0.05));
        assert_eq!(nodes.first(), Some(&-1.0));
        assert_eq!(nodes.last(), Some(&1.0));
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(TimeGrid::new(1.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let p = SquarePulse::new(0.0, 0.0, Window::new(0.0, 1.0).unwrap());
        let model = HamiltonianModel::arp(p);
        let psi0 = CollectiveState::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let traj = propagate(&model, &psi0, &TimeGrid::new(0.0, 1.0, 100).unwrap()).unwrap();
        assert_eq!(traj.final_amplitudes(), psi0.amplitudes.as_slice());
    }

    #[test]
    fn resonant_pi_pulse_inverts() {
        let rabi = mhz(5.0);
        let p = SquarePulse::with_area(rabi, std::f64::consts::PI, 0.0).unwrap();
        let model = HamiltonianModel::arp(p);
        let grid = TimeGrid::with_density(p.window, DEFAULT_STEPS_PER_US).unwrap();
        let traj = propagate(&model, &CollectiveState::basis_vector(2, 0), &grid).unwrap();
        assert!((traj.final_populations()[1] - 1.0).abs() < 1e-8);
        let r = traj.final_amplitudes()[1];
        assert_relative_eq!(r.im, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn fig2_passage_inverts_and_conserves_norm() {
        let model = HamiltonianModel::arp(fig2());
        let grid = TimeGrid::with_density(fig2().support_with(1e-8), DEFAULT_STEPS_PER_US).unwrap();
        let traj = propagate(&model, &CollectiveState::basis_vector(2, 0), &grid).unwrap();
        assert!(traj.final_populations()[1] > 0.999);
        assert!(traj.max_norm_drift() < 1e-8);
        assert_relative_eq!(traj.final_populations()[1], 0.9999987, epsilon = 2e-7);
    }

    #[test]
    fn free_phase_slope_is_minus_energy() {
        let p = SquarePulse::new(0.0, 2.0, Window::new(0.0, 1.0).unwrap());
        let model = HamiltonianModel::arp(p);
        let psi0 = CollectiveState::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let traj = propagate(&model, &psi0, &TimeGrid::new(0.0, 3.0, 3000).unwrap()).unwrap();
        let phase = extract_phase(&traj, 1);
        let slope = (phase[phase.len() - 1] - phase[0]) / (traj.times[traj.len() - 1] - traj.times[0]);
        assert_relative_eq!(slope, -1.0, epsilon = 1e-9);
        assert!(extract_phase(&traj, 0).iter().all(|p| p.is_nan()));
    }

    #[test]
    fn real_positive_amplitude_has_zero_phase() {
        let model = HamiltonianModel::arp(SquarePulse::new(0.0, 0.0, Window::new(0.0, 1.0).unwrap()));
        let traj = propagate(
            &model,
            &CollectiveState::basis_vector(2, 0),
            &TimeGrid::new(0.0, 1.0, 10).unwrap(),
        )
        .unwrap();
        assert!(extract_phase(&traj, 0).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn step_halving_is_fourth_order() {
        let model = HamiltonianModel::arp(fig2());
        let window = fig2().support();
        let psi0 = CollectiveState::basis_vector(2, 0);
        let finals: Vec<Vec<Complex64>> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&d| {
                let grid = TimeGrid::with_density(window, d).unwrap();
                propagate(&model, &psi0, &grid).unwrap().final_amplitudes().to_vec()
            })
            .collect();
        let diff = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let order = (diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2])).log2();
        assert!(order >= 3.5, "measured order {order}");

        let fine = |d| {
            let grid = TimeGrid::with_density(window, d).unwrap();
            propagate(&model, &psi0, &grid).unwrap().final_amplitudes().to_vec()
        };
        assert!(diff(&fine(DEFAULT_STEPS_PER_US), &fine(2.0 * DEFAULT_STEPS_PER_US)) < 1e-8);
    }

    #[test]
    fn adaptive_mode_agrees_with_fixed_steps() {
        let model = HamiltonianModel::arp(fig2());
        let psi0 = CollectiveState::basis_vector(2, 0);
        let fixed = TimeGrid::with_density(fig2().support(), DEFAULT_STEPS_PER_US).unwrap();
        let adaptive = TimeGrid::new(fixed.t_start, fixed.t_end, 100)
            .unwrap()
            .with_adaptive(1e-13, 1e-15);
        let a = propagate(&model, &psi0, &fixed).unwrap();
        let b = propagate(&model, &psi0, &adaptive).unwrap();
        for (x, y) in a.final_amplitudes().iter().zip(b.final_amplitudes()) {
            assert!((x - y).norm() < 1e-8, "{} steps: {}", b.len(), (x - y).norm());
        }
    }

    #[test]
    fn adaptive_underflow_reports_time() {
        let p = SquarePulse::new(1e12, 0.0, Window::new(0.0, 1.0).unwrap());
        let model = HamiltonianModel::arp(p);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap().with_adaptive(1e-300, 0.0);
        assert!(matches!(
            propagate(&model, &CollectiveState::basis_vector(2, 0), &grid),
            Err(PropagationError::StepUnderflow { .. })
        ));
    }

    #[test]
    fn rejects_bad_initial_states() {
        let model = HamiltonianModel::arp(fig2());
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            propagate(&model, &CollectiveState::basis_vector(3, 0), &grid),
            Err(PropagationError::DimensionMismatch { .. })
        ));
        let unnormalized = CollectiveState::new(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(matches!(
            propagate(&model, &unnormalized, &grid),
            Err(PropagationError::NotNormalized(_))
        ));
    }

    #[test]
    fn jump_is_sampled_from_the_correct_side() {
        // A detuning switch at t = 0.5: free evolution accumulates exactly
        // -(∫ δ/2) on the excited state irrespective of the step count.
        let first: TwoLevelPulse = SquarePulse::new(0.0, 1.0, Window::new(0.0, 0.5).unwrap()).into();
        let seq = crate::pulses::DoubleSequence {
            second: first.shifted(0.5),
            first,
            mode: crate::pulses::DoubleMode::DetuningSignSwitched,
            switch_time: 0.5,
        };
        let model = HamiltonianModel::arp(TwoLevelPulse::from(seq));
        let psi0 = CollectiveState::basis_vector(2, 1);
        for steps in [4, 7, 40] {
            let traj = propagate(&model, &psi0, &TimeGrid::new(0.0, 1.0, steps).unwrap()).unwrap();
            assert!(traj.final_phase(1).abs() < 1e-12, "steps={steps}");
        }
    }

    #[test]
    fn constant_hamiltonian_has_constant_traces() {
        let p = SquarePulse::new(1.0, 0.5, Window::new(-5.0, 5.0).unwrap());
        let model = HamiltonianModel::arp(p);
        let track = eigen_track(
            &model,
            &TimeGrid::new(0.0, 1.0, 20).unwrap(),
            &CollectiveState::basis_vector(2, 0),
        )
        .unwrap();
        for k in 0..2 {
            let trace = track.trace(k);
            assert!(trace.iter().all(|v| (v - trace[0]).abs() < 1e-14));
        }
        assert!(track.ambiguous.is_empty());
        assert_eq!(track.initial_state_branch, 0);
    }

    #[test]
    fn stirap_tracks_follow_dark_and_bright_states() {
        let pair = StirapPair::new(mhz(10.0), mhz(10.0), -1.0, 1.0, 1.0, 0.0).unwrap();
        let model = HamiltonianModel::ensemble_three_level(2, Representation::Full, pair).unwrap();
        let grid = TimeGrid::new(-5.0, 5.0, 400).unwrap();
        let track = eigen_track(&model, &grid, &CollectiveState::basis_vector(8, 0)).unwrap();
        assert!(track.zero_branch(1e-10).is_some());

        let detuned = StirapPair {
            detuning: mhz(10.0),
            ..pair
        };
        let model = HamiltonianModel::ensemble_three_level(2, Representation::Full, detuned).unwrap();
        let overlap_times: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
        let track = eigen_track_at(&model, &overlap_times, &CollectiveState::basis_vector(8, 0)).unwrap();
        assert!(track.zero_branch(1e-6).is_none());
    }

    #[test]
    fn symmetric_and_full_propagation_agree() {
        let pair = StirapPair::new(mhz(30.0), mhz(40.0), -1.0, 1.0, 1.0, mhz(200.0)).unwrap();
        let settings = |representation| ExcitationSettings {
            representation,
            steps_per_us: 2e4,
            window: None,
        };
        let protocol = Protocol::Stirap(pair.into());
        let (_, full) = run_ensemble(2, &protocol, &settings(Representation::Full)).unwrap();
        let (_, sym) = run_ensemble(2, &protocol, &settings(Representation::Symmetric)).unwrap();
        let basis = BlockadedBasis::new(2, LevelScheme::ThreeLevel, Representation::Full).unwrap();
        let (projected, leakage) = project_to_symmetric(&basis, &full.final_state()).unwrap();
        assert!(leakage < 1e-12);
        for (a, b) in projected.amplitudes.iter().zip(sym.final_amplitudes()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn single_atom_stirap_transfers() {
        let pair = StirapPair::new(mhz(30.0), mhz(40.0), -1.0, 1.0, 1.0, 0.0).unwrap();
        let p = run_excitation_probability(1, &Protocol::Stirap(pair.into()), &ExcitationSettings::default()).unwrap();
        assert!(p > 0.99);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn global_phase_commutes(phi in -3.2f64..3.2) {
            let model = HamiltonianModel::arp(fig2());
            let grid = TimeGrid::with_density(fig2().support(), 500.0).unwrap();
            let psi0 = CollectiveState::basis_vector(2, 0);
            let rotated = psi0.scaled(Complex64::from_polar(1.0, phi));
            let a = propagate(&model, &psi0, &grid).unwrap();
            let b = propagate(&model, &rotated, &grid).unwrap();
            for (x, y) in a.final_amplitudes().iter().zip(b.final_amplitudes()) {
                prop_assert!((x * Complex64::from_polar(1.0, phi) - y).norm() < 1e-10);
            }
        }

        #[test]
        fn norm_is_conserved(peak in 1.0f64..20.0, chirp in -5.0f64..5.0) {
            let p = GaussianChirpPulse::new(mhz(peak), 1.0, 0.0, mhz(chirp)).unwrap();
            let model = HamiltonianModel::ensemble_two_level(3, Representation::Full, p).unwrap();
            let grid = TimeGrid::with_density(p.support(), DEFAULT_STEPS_PER_US).unwrap();
            let traj = propagate(&model, &CollectiveState::basis_vector(4, 0), &grid).unwrap();
            prop_assert!(traj.max_norm_drift() < 1e-8);
        }
    }
}
