//! Adiabatic passage in blockaded Rydberg ensembles.
//!
//! The crate models chirped two-level passage and three-level STIRAP in
//! single atoms and in N-atom ensembles under perfect Rydberg blockade,
//! propagates the Schrödinger equation, compares the result with adiabatic
//! predictions, and composes ensemble-qubit and Förster-resonance gates.
//!
//! Units: ħ = 1, time in µs, frequencies in rad/µs. Use [`units::mhz`] to
//! convert from linear frequencies.

pub mod adiabatic;
pub mod forster;
pub mod gates;
pub mod hamiltonians;
pub mod parallel;
pub mod propagator;
pub mod pulses;
pub mod statespace;
pub mod units;
