//! Unit conversions between user-facing linear frequencies and internal
//! angular frequencies.
//!
//! Internally ħ = 1, time is in µs and every frequency is in rad/µs. Config
//! files and reports quote linear frequencies in MHz.

use std::f64::consts::TAU;

/// Linear frequency in MHz to angular frequency in rad/µs.
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

/// Angular frequency in rad/µs to linear frequency in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = phi.rem_euclid(TAU);
    if x > PI {
        x -= TAU;
    }
    x
}
