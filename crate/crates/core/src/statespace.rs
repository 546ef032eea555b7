//! Collective basis states of N identical atoms under perfect Rydberg blockade.
//!
//! Two representations are offered. The full product basis lists every
//! string of single-atom levels that holds at most one Rydberg excitation, in
//! lexicographic order with `g < e < r` and the first atom most significant.
//! For two three-level atoms this reproduces the order
//! `gg, ge, gr, eg, ee, er, rg, re`. The symmetric basis lists
//! permutation-symmetric occupation states `(n_g, n_e, n_r)`, ordered first
//! by `n_r` and then by increasing `n_e`.

use num_complex::Complex64;
use thiserror::Error;

/// Largest ensemble enumerated in the full product basis.
pub const MAX_FULL_ATOMS: usize = 12;
/// Largest ensemble enumerated in the symmetric basis.
pub const MAX_SYMMETRIC_ATOMS: usize = 100;
/// Default tolerance on `|‖ψ‖² - 1|` for a [`CollectiveState`].
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("{representation:?} basis supports 1..={max} atoms, got {requested}")]
    Capacity {
        representation: Representation,
        requested: usize,
        max: usize,
    },
    #[error("occupation {0:?} violates the blockade or the level scheme")]
    Constraint(Occupation),
    #[error("state has {actual} amplitudes but the basis has {expected} states")]
    Shape { expected: usize, actual: usize },
    #[error("operation requires the {0:?} representation")]
    WrongRepresentation(Representation),
    #[error("state norm {0} differs from 1 beyond tolerance")]
    NotNormalized(f64),
}

/// Single-atom level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Ground,
    Intermediate,
    Rydberg,
}

impl Level {
    pub fn symbol(self) -> char {
        match self {
            Level::Ground => 'g',
            Level::Intermediate => 'e',
            Level::Rydberg => 'r',
        }
    }

    pub fn is_rydberg(self) -> bool {
        self == Level::Rydberg
    }
}

/// Single-atom level structure: `{g, r}` or the ladder `{g, e, r}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelScheme {
    TwoLevel,
    ThreeLevel,
}

impl LevelScheme {
    pub fn levels(self) -> &'static [Level] {
        match self {
            LevelScheme::TwoLevel => &[Level::Ground, Level::Rydberg],
            LevelScheme::ThreeLevel => &[Level::Ground, Level::Intermediate, Level::Rydberg],
        }
    }

    pub fn rydberg_levels(self) -> &'static [Level] {
        &[Level::Rydberg]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Full,
    Symmetric,
}

/// Number of atoms in each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Occupation {
    pub ground: usize,
    pub intermediate: usize,
    pub rydberg: usize,
}

impl Occupation {
    pub fn new(ground: usize, intermediate: usize, rydberg: usize) -> Self {
        Self {
            ground,
            intermediate,
            rydberg,
        }
    }

    pub fn total(&self) -> usize {
        self.ground + self.intermediate + self.rydberg
    }

    fn label(&self) -> String {
        format!("g{}e{}r{}", self.ground, self.intermediate, self.rydberg)
    }
}

/// One element of a [`BlockadedBasis`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BasisState {
    /// Product state listing each atom's level.
    Product(Vec<Level>),
    /// Normalized permutation-symmetric state with the given occupation.
    Symmetric(Occupation),
}

impl BasisState {
    pub fn occupation(&self) -> Occupation {
        match self {
            BasisState::Symmetric(o) => *o,
            BasisState::Product(levels) => {
                let count = |l: Level| levels.iter().filter(|&&x| x == l).count();
                Occupation::new(count(Level::Ground), count(Level::Intermediate), count(Level::Rydberg))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            BasisState::Product(levels) => levels.iter().map(|l| l.symbol()).collect(),
            BasisState::Symmetric(o) => o.label(),
        }
    }
}

/// Enumerated collective basis with at most one Rydberg excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockadedBasis {
    n_atoms: usize,
    scheme: LevelScheme,
    representation: Representation,
    states: Vec<BasisState>,
}

impl BlockadedBasis {
    /// Maximum number of simultaneous Rydberg excitations.
    pub const MAX_RYDBERG: usize = 1;

    pub fn new(n_atoms: usize, scheme: LevelScheme, representation: Representation) -> Result<Self, StateError> {
        let max = match representation {
            Representation::Full => MAX_FULL_ATOMS,
            Representation::Symmetric => MAX_SYMMETRIC_ATOMS,
        };
        if n_atoms == 0 || n_atoms > max {
            return Err(StateError::Capacity {
                representation,
                requested: n_atoms,
                max,
            });
        }
        let states = match representation {
            Representation::Full => product_states(n_atoms, scheme),
            Representation::Symmetric => symmetric_states(n_atoms, scheme),
        };
        Ok(Self {
            n_atoms,
            scheme,
            representation,
            states,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn scheme(&self) -> LevelScheme {
        self.scheme
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.states.iter().map(BasisState::label).collect()
    }

    pub fn index_of(&self, state: &BasisState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// Index of the collective ground state (all atoms in `g`); always 0.
    pub fn ground_index(&self) -> usize {
        0
    }

    /// Indices of all states holding exactly one Rydberg excitation.
    pub fn single_rydberg_indices(&self) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.occupation().rydberg == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// The basis for the other representation with the same atoms and scheme.
    pub fn counterpart(&self) -> Self {
        let representation = match self.representation {
            Representation::Full => Representation::Symmetric,
            Representation::Symmetric => Representation::Full,
        };
        Self::new(self.n_atoms, self.scheme, representation).expect("full-basis capacity is below symmetric capacity")
    }

    /// Dimension predicted by counting arguments, without enumerating.
    pub fn expected_dim(n_atoms: usize, scheme: LevelScheme, representation: Representation) -> usize {
        match (scheme, representation) {
            (LevelScheme::ThreeLevel, Representation::Full) => {
                (1usize << n_atoms) + n_atoms * (1usize << (n_atoms - 1))
            }
            (LevelScheme::ThreeLevel, Representation::Symmetric) => 2 * n_atoms + 1,
            (LevelScheme::TwoLevel, Representation::Full) => 1 + n_atoms,
            (LevelScheme::TwoLevel, Representation::Symmetric) => 2,
        }
    }
}

fn product_states(n: usize, scheme: LevelScheme) -> Vec<BasisState> {
    let levels = scheme.levels();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn recurse(n: usize, levels: &[Level], current: &mut Vec<Level>, rydberg_used: bool, out: &mut Vec<BasisState>) {
        if current.len() == n {
            out.push(BasisState::Product(current.clone()));
            return;
        }
        for &level in levels {
            if level.is_rydberg() && rydberg_used {
                continue;
            }
            current.push(level);
            recurse(n, levels, current, rydberg_used || level.is_rydberg(), out);
            current.pop();
        }
    }
    recurse(n, levels, &mut current, false, &mut out);
    out
}

fn symmetric_states(n: usize, scheme: LevelScheme) -> Vec<BasisState> {
    let max_e = |rydberg: usize| match scheme {
        LevelScheme::TwoLevel => 0,
        LevelScheme::ThreeLevel => n - rydberg,
    };
    (0..=BlockadedBasis::MAX_RYDBERG.min(n))
        .flat_map(|r| (0..=max_e(r)).map(move |e| Occupation::new(n - r - e, e, r)))
        .map(BasisState::Symmetric)
        .collect()
}

/// Complex amplitudes over a collective basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    pub amplitudes: Vec<Complex64>,
    pub norm_tolerance: f64,
}

impl CollectiveState {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self {
            amplitudes,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        }
    }

    /// Basis vector `index` of a `dim`-dimensional space.
    pub fn basis_vector(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self::new(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= self.norm_tolerance
    }

    pub fn check_normalized(&self) -> Result<(), StateError> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(StateError::NotNormalized(self.norm_sqr().sqrt()))
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            norm_tolerance: self.norm_tolerance,
        }
    }

    pub fn inner(&self, other: &CollectiveState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Equal-weight superposition of all product states with the given
/// occupation, expressed in the full basis `full`.
pub fn symmetric_state(full: &BlockadedBasis, occupation: Occupation) -> Result<CollectiveState, StateError> {
    if full.representation != Representation::Full {
        return Err(StateError::WrongRepresentation(Representation::Full));
    }
    let allowed_e = full.scheme == LevelScheme::ThreeLevel || occupation.intermediate == 0;
    if occupation.total() != full.n_atoms || occupation.rydberg > BlockadedBasis::MAX_RYDBERG || !allowed_e {
        return Err(StateError::Constraint(occupation));
    }
    let members: Vec<usize> = full
        .states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.occupation() == occupation)
        .map(|(i, _)| i)
        .collect();
    let weight = Complex64::new(1.0 / (members.len() as f64).sqrt(), 0.0);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); full.dim()];
    for i in members {
        amplitudes[i] = weight;
    }
    Ok(CollectiveState::new(amplitudes))
}

/// Matrix whose columns are the symmetric basis states written in the full
/// basis, as `(full_index, symmetric_index, weight)` triplets.
pub fn symmetric_embedding(full: &BlockadedBasis) -> Result<Vec<(usize, usize, f64)>, StateError> {
    if full.representation != Representation::Full {
        return Err(StateError::WrongRepresentation(Representation::Full));
    }
    let sym = full.counterpart();
    let mut triplets = Vec::new();
    for (j, s) in sym.states.iter().enumerate() {
        let column = symmetric_state(full, s.occupation())?;
        for (i, a) in column.amplitudes.iter().enumerate() {
            if a.re != 0.0 {
                triplets.push((i, j, a.re));
            }
        }
    }
    Ok(triplets)
}

/// Lifts a symmetric-basis state into the full basis.
pub fn embed_symmetric(full: &BlockadedBasis, state: &CollectiveState) -> Result<CollectiveState, StateError> {
    let sym_dim = BlockadedBasis::expected_dim(full.n_atoms, full.scheme, Representation::Symmetric);
    if state.dim() != sym_dim {
        return Err(StateError::Shape {
            expected: sym_dim,
            actual: state.dim(),
        });
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); full.dim()];
    for (i, j, w) in symmetric_embedding(full)? {
        amplitudes[i] += state.amplitudes[j] * w;
    }
    Ok(CollectiveState::new(amplitudes))
}

/// Components of a full-basis state along the symmetric basis, together with
/// the squared norm left outside the symmetric subspace.
pub fn project_to_symmetric(
    full: &BlockadedBasis,
    state: &CollectiveState,
) -> Result<(CollectiveState, f64), StateError> {
    if state.dim() != full.dim() {
        return Err(StateError::Shape {
            expected: full.dim(),
            actual: state.dim(),
        });
    }
    let sym_dim = BlockadedBasis::expected_dim(full.n_atoms, full.scheme, Representation::Symmetric);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); sym_dim];
    for (i, j, w) in symmetric_embedding(full)? {
        amplitudes[j] += state.amplitudes[i] * w;
    }
    let projected = CollectiveState {
        amplitudes,
        norm_tolerance: state.norm_tolerance,
    };
    let leakage = (state.norm_sqr() - projected.norm_sqr()).max(0.0);
    Ok((projected, leakage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn full3(n: usize) -> BlockadedBasis {
        BlockadedBasis::new(n, LevelScheme::ThreeLevel, Representation::Full).unwrap()
    }

    #[test]
    fn two_atom_order_matches_printed_hamiltonian() {
        let labels = full3(2).labels();
        assert_eq!(labels, ["gg", "ge", "gr", "eg", "ee", "er", "rg", "re"]);
    }

    #[test]
    fn basis_orders_are_stable() {
        let labels = full3(3).labels().join(",");
        let golden = "ggg,gge,ggr,geg,gee,ger,grg,gre,egg,ege,egr,eeg,eee,eer,erg,ere,\
                      rgg,rge,reg,ree";
        assert_eq!(labels, golden);
        let sym = BlockadedBasis::new(2, LevelScheme::ThreeLevel, Representation::Symmetric)
            .unwrap()
            .labels()
            .join(",");
        assert_eq!(sym, "g2e0r0,g1e1r0,g0e2r0,g1e0r1,g0e1r1");
        let two = BlockadedBasis::new(3, LevelScheme::TwoLevel, Representation::Full)
            .unwrap()
            .labels()
            .join(",");
        assert_eq!(two, "ggg,ggr,grg,rgg");
    }

    #[test]
    fn small_dimensions() {
        assert_eq!(full3(1).dim(), 3);
        assert_eq!(full3(3).dim(), 20);
    }

    #[test]
    fn capacity_limits() {
        assert!(matches!(
            BlockadedBasis::new(13, LevelScheme::ThreeLevel, Representation::Full),
            Err(StateError::Capacity { .. })
        ));
        assert!(BlockadedBasis::new(0, LevelScheme::TwoLevel, Representation::Symmetric).is_err());
        assert!(BlockadedBasis::new(100, LevelScheme::ThreeLevel, Representation::Symmetric).is_ok());
    }

    #[test]
    fn two_atom_single_rydberg_superposition() {
        let basis = full3(2);
        let s = symmetric_state(&basis, Occupation::new(1, 0, 1)).unwrap();
        let w = 1.0 / 2f64.sqrt();
        let gr = basis
            .index_of(&BasisState::Product(vec![Level::Ground, Level::Rydberg]))
            .unwrap();
        let rg = basis
            .index_of(&BasisState::Product(vec![Level::Rydberg, Level::Ground]))
            .unwrap();
        for (i, a) in s.amplitudes.iter().enumerate() {
            let expected = if i == gr || i == rg { w } else { 0.0 };
            assert_relative_eq!(a.re, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn three_atom_symmetric_state_has_three_terms() {
        let s = symmetric_state(&full3(3), Occupation::new(2, 0, 1)).unwrap();
        let nonzero: Vec<f64> = s.amplitudes.iter().filter(|a| a.norm() > 0.0).map(|a| a.re).collect();
        assert_eq!(nonzero.len(), 3);
        for a in nonzero {
            assert_relative_eq!(a, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        }
        let single = symmetric_state(&full3(1), Occupation::new(0, 0, 1)).unwrap();
        assert_eq!(single.amplitudes[2], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn blockade_violations_are_rejected() {
        assert!(matches!(
            symmetric_state(&full3(3), Occupation::new(1, 0, 2)),
            Err(StateError::Constraint(_))
        ));
        let two = BlockadedBasis::new(2, LevelScheme::TwoLevel, Representation::Full).unwrap();
        assert!(symmetric_state(&two, Occupation::new(1, 1, 0)).is_err());
    }

    #[test]
    fn projection_of_single_product_state() {
        let basis = full3(2);
        let gr = CollectiveState::basis_vector(8, 2);
        let (sym, leakage) = project_to_symmetric(&basis, &gr).unwrap();
        let sym_basis = basis.counterpart();
        let k = sym_basis
            .index_of(&BasisState::Symmetric(Occupation::new(1, 0, 1)))
            .unwrap();
        assert_relative_eq!(sym.amplitudes[k].re, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(leakage, 0.5, epsilon = 1e-15);
        let ground = CollectiveState::basis_vector(8, 0);
        let (sym, leakage) = project_to_symmetric(&basis, &ground).unwrap();
        assert_relative_eq!(sym.amplitudes[0].re, 1.0);
        assert!(leakage < 1e-15);
    }

    #[test]
    fn projection_rejects_wrong_shape() {
        let v = CollectiveState::basis_vector(5, 0);
        assert!(matches!(
            project_to_symmetric(&full3(2), &v),
            Err(StateError::Shape { .. })
        ));
    }

    proptest! {
        #[test]
        fn dimension_formulas(n in 1usize..=8) {
            for scheme in [LevelScheme::TwoLevel, LevelScheme::ThreeLevel] {
                for rep in [Representation::Full, Representation::Symmetric] {
                    let b = BlockadedBasis::new(n, scheme, rep).unwrap();
                    prop_assert_eq!(b.dim(), BlockadedBasis::expected_dim(n, scheme, rep));
                    prop_assert!(b.states().iter().all(|s| s.occupation().rydberg <= 1));
                }
            }
        }

        #[test]
        fn symmetric_states_project_without_leakage(n in 1usize..=5, pick in 0usize..100) {
            let basis = full3(n);
            let sym = basis.counterpart();
            let occ = sym.states()[pick % sym.dim()].occupation();
            let s = symmetric_state(&basis, occ).unwrap();
            prop_assert!(s.is_normalized());
            let (p, leakage) = project_to_symmetric(&basis, &s).unwrap();
            prop_assert!(leakage < 1e-12);
            let back = embed_symmetric(&basis, &p).unwrap();
            for (a, b) in back.amplitudes.iter().zip(&s.amplitudes) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn projection_preserves_norm(n in 1usize..=4, seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let basis = full3(n);
            let amplitudes: Vec<Complex64> = (0..basis.dim())
                .map(|i| Complex64::new(seed[i % 64], seed[(i * 7 + 3) % 64]))
                .collect();
            let state = CollectiveState::new(amplitudes);
            let (p, leakage) = project_to_symmetric(&basis, &state).unwrap();
            prop_assert!((p.norm_sqr() + leakage - state.norm_sqr()).abs() < 1e-12);
        }
    }
}
