//! Atom-number statistics of trap loading.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RunnerError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonLoadingSpec {
    pub mean_atoms: f64,
    pub max_atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonTable {
    pub mean_atoms: f64,
    /// `P(N)` for `N = 0..=max_atoms`.
    pub probabilities: Vec<f64>,
    /// Probability of loading more than `max_atoms`.
    pub remainder: f64,
}

impl PoissonTable {
    pub fn probability(&self, n: usize) -> Option<f64> {
        self.probabilities.get(n).copied()
    }
}

/// `P(N) = e^{-N̄} N̄^N / N!`, built by the recurrence `P(N) = P(N-1)·N̄/N`.
pub fn poisson_stats(spec: &PoissonLoadingSpec) -> Result<PoissonTable> {
    let mean = spec.mean_atoms;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(RunnerError::config(format!(
            "mean atom number must be positive, got {mean}"
        )));
    }
    let mut probabilities = Vec::with_capacity(spec.max_atoms + 1);
    let mut p = (-mean).exp();
    probabilities.push(p);
    for n in 1..=spec.max_atoms {
        p *= mean / n as f64;
        probabilities.push(p);
    }
    let total: f64 = probabilities.iter().sum();
    Ok(PoissonTable {
        mean_atoms: mean,
        probabilities,
        remainder: (1.0 - total).max(0.0),
    })
}
