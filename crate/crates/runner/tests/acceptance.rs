//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden. The binary exits with status 0
//! after printing the tally so the rest of the workspace suite still runs;
//! set `RYDPASS_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rydpass::gates::{cnot_matrix, ensemble_cnot_matrix, max_deviation, EnsembleOperators, LogicalEncoding, Operator};
use rydpass::parallel::Execution;
use rydpass::statespace::{project_to_symmetric, CollectiveState};
use rydpass::units::wrap_phase;
use rydpass_cli::config::{RepresentationSpec, ScenarioConfig};
use rydpass_cli::poisson::{poisson_stats, PoissonLoadingSpec};
use rydpass_cli::presets::{self, PresetOptions, PHASE_POPULATION_FLOOR, STIRAP_ORDERINGS, ZERO_BRANCH_TOLERANCE};
use rydpass_cli::scenario::run_scenario;
use rydpass_cli::Result;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct Suite {
    outcomes: Vec<Outcome>,
    options: PresetOptions,
}

impl Suite {
    fn record(&mut self, id: &'static str, title: &'static str, pass: bool, detail: String) {
        println!("{} {id:<4} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.outcomes.push(Outcome {
            id,
            title,
            pass,
            detail,
        });
    }

    fn error(&mut self, id: &'static str, title: &'static str, err: impl std::fmt::Display) {
        self.record(id, title, false, format!("error: {err}"));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

fn circular(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

fn arp_inversion(s: &mut Suite) -> Result<()> {
    let (out, elapsed) = timed(|| presets::fig2(&s.options));
    let m = out?.summary;
    let pass = m.final_excited_population >= 0.999 && m.dressed_max_deviation < 1e-2 && elapsed.as_secs_f64() < 5.0;
    s.record(
        "1",
        "ARP inversion",
        pass,
        format!(
            "P_r = {:.7} (>= 0.999), dressed deviation {:.2e} over {} samples with margin < 0.05 (< 1e-2), {:.2} s (< 5 s)",
            m.final_excited_population,
            m.dressed_max_deviation,
            m.dressed_samples,
            elapsed.as_secs_f64()
        ),
    );
    Ok(())
}

fn n_independence(s: &mut Suite) -> Result<()> {
    let (out, elapsed) = timed(|| presets::fig3a(&s.options));
    let m = out?.summary;
    let p1: Vec<String> = m
        .rows
        .iter()
        .map(|r| format!("{:.7}", r.single_rydberg_population))
        .collect();
    s.record(
        "2",
        "ARP independent of N",
        m.spread < 1e-3 && elapsed.as_secs_f64() < 30.0,
        format!(
            "P1(N=1,2,3) = [{}], spread {:.2e} (< 1e-3), {:.2} s (< 30 s)",
            p1.join(", "),
            m.spread,
            elapsed.as_secs_f64()
        ),
    );
    Ok(())
}

fn dark_state_failure(s: &mut Suite) -> Result<()> {
    let m = presets::fig3b(&s.options)?.summary;
    let mut pass = true;
    let mut parts = Vec::new();
    for zb in &m.zero_branches {
        let p1 = m
            .rows
            .iter()
            .find(|r| r.atoms == 2 && r.ordering.as_deref() == Some(zb.ordering.as_str()))
            .map_or(f64::NAN, |r| r.single_rydberg_population);
        let ratio = zb.max_relative_eigenvalue.unwrap_or(f64::INFINITY);
        pass &= p1 < 0.05 && zb.branch.is_some() && ratio < ZERO_BRANCH_TOLERANCE;
        parts.push(format!(
            "{}: P1 = {p1:.2e} (< 0.05), max |λ|/‖H‖ = {ratio:.1e}",
            zb.ordering
        ));
    }
    pass &= m.zero_branches.len() == STIRAP_ORDERINGS.len();
    s.record("3", "dark-state failure at δ = 0, N = 2", pass, parts.join("; "));
    Ok(())
}

fn regime_switch(s: &mut Suite) -> Result<()> {
    let m = presets::fig4(&s.options)?.summary;
    let p = |d: f64| m.at(d).map_or(f64::NAN, |r| r.single_rydberg_population);
    let pass = p(10.0) > 0.9 && p(0.0) < 0.1 && p(4.0) < 0.5 && p(5.0) >= 0.5;
    s.record(
        "4",
        "regime switch with detuning",
        pass,
        format!(
            "P1 at δ = 0, 4, 5, 10 MHz: {:.2e}, {:.3}, {:.3}, {:.5} (need < 0.1 at 0, > 0.9 at 10, crossing 0.5 between 4 and 5)",
            p(0.0),
            p(4.0),
            p(5.0),
            p(10.0)
        ),
    );
    Ok(())
}

fn optimized_stirap(s: &mut Suite) -> Result<()> {
    let m = presets::fig6(&s.options)?.summary;
    let worst_opt = m.rows.iter().map(|r| r.optimized_error).fold(0.0, f64::max);
    let worst_gauss = m.rows.iter().map(|r| r.gaussian_error).fold(0.0, f64::max);
    s.record(
        "5",
        "optimized STIRAP pulses",
        worst_opt < 1e-5 && worst_gauss > 1e-4,
        format!("max 1-P1 over N=1..5: optimized {worst_opt:.2e} (< 1e-5), Gaussian {worst_gauss:.2e} (> 1e-4)"),
    );
    Ok(())
}

fn double_arp_phase(s: &mut Suite) -> Result<()> {
    let m = presets::fig7(&s.options)?.summary;
    let ident = m.get("identical").map_or(f64::NAN, |r| r.final_phase);
    let flipped = m.get("phase_flipped").map_or(f64::NAN, |r| r.final_phase);
    let (d_ident, d_flip) = (circular(ident, PI), circular(flipped, 0.0));
    s.record(
        "6",
        "double ARP phase",
        d_ident < 0.02 && d_flip < 0.02,
        format!("identical: {ident:.6} (|φ-π| = {d_ident:.1e}), phase-flipped: {flipped:.2e} (< 0.02 each)"),
    );
    Ok(())
}

fn phase_cancellation(s: &mut Suite) -> Result<()> {
    let fig8 = presets::fig8(&s.options)?.summary;
    let fig9 = presets::fig9(&s.options)?.summary;
    let all: Vec<_> = fig8.runs.iter().chain(&fig9.stirap).collect();

    let switched: Vec<_> = fig9.stirap.iter().filter(|r| r.sign_switched).collect();
    let worst_switched = switched.iter().map(|r| r.final_phase.abs()).fold(0.0, f64::max);
    s.record(
        "7a",
        "sign-switched double STIRAP cancels the phase",
        switched.len() == 3 && worst_switched < 0.02,
        format!(
            "final ground phase for N = {}: max |φ| = {worst_switched:.1e} (< 0.02)",
            switched
                .iter()
                .map(|r| r.atoms.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
    );

    let constant: Vec<_> = fig9.stirap.iter().filter(|r| !r.sign_switched).collect();
    let phases: Vec<f64> = constant.iter().map(|r| r.final_phase).collect();
    let nonzero = phases.iter().all(|p| p.abs() > 0.02);
    let distinct = phases
        .iter()
        .enumerate()
        .all(|(i, a)| phases[i + 1..].iter().all(|b| circular(*a, *b) > 0.02));
    s.record(
        "7b",
        "constant-δ phase depends on N",
        constant.len() == 3 && nonzero && distinct,
        format!(
            "final ground phase for N = 1,2,7: [{}] (each nonzero, pairwise distinct)",
            phases.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let deviations: Vec<(String, f64)> = all
        .iter()
        .map(|r| (r.label.clone(), r.max_phase_deviation.unwrap_or(f64::NAN)))
        .collect();
    let worst = deviations.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    s.record(
        "7c",
        "phase follows the integrated eigenvalue",
        deviations.iter().all(|(_, d)| *d < 0.02),
        format!(
            "max |φ - φ_adiabatic| where P_g > {PHASE_POPULATION_FLOOR:.0e}: {worst:.3} (< 0.02); per run [{}]",
            deviations
                .iter()
                .map(|(l, d)| format!("{l} {d:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    Ok(())
}

fn poisson_loading(s: &mut Suite) -> Result<()> {
    let t = poisson_stats(&PoissonLoadingSpec {
        mean_atoms: 5.0,
        max_atoms: 20,
    })?;
    let p0 = t.probabilities[0];
    s.record(
        "8",
        "Poisson loading",
        (p0 - 0.0067).abs() < 5e-5,
        format!("P(0; mean 5) = {p0:.6} (0.0067 ± 5e-5)"),
    );
    Ok(())
}

fn pi_pulse_vs_adiabatic(s: &mut Suite) -> Result<()> {
    let m = presets::fig5(&s.options)?.summary;
    let sizes = [2, 3, 4, 6, 7];
    let mut ratio_ok = true;
    let mut worst_ratio = f64::INFINITY;
    for r in m.rows.iter().filter(|r| sizes.contains(&r.atoms)) {
        let worst = r.arp_error.max(r.stirap_error);
        ratio_ok &= 10.0 * worst < r.pi_pulse_error;
        worst_ratio = worst_ratio.min(r.pi_pulse_error / worst);
    }
    s.record(
        "9",
        "π pulse against adiabatic passage",
        m.max_dynamical_mismatch < 1e-12 && ratio_ok,
        format!(
            "dynamical vs closed form {:.1e} (< 1e-12); smallest π-pulse/adiabatic error ratio for N in {{2,3,4,6,7}}: {worst_ratio:.1} (> 10)",
            m.max_dynamical_mismatch
        ),
    );
    Ok(())
}

fn nonlinear_double_arp(s: &mut Suite) -> Result<()> {
    let m = presets::fig10(&s.options)?.summary;
    let pass = m
        .runs
        .iter()
        .all(|r| r.population_error < 4e-5 && r.phase_offset < 0.01);
    let parts: Vec<String> = m
        .runs
        .iter()
        .map(|r| {
            format!(
                "{}: population error {:.3e}, |φ-π| = {:.1e}, max margin {:.3}",
                r.label, r.population_error, r.phase_offset, r.max_margin
            )
        })
        .collect();
    s.record(
        "10",
        "nonlinear-detuning double ARP",
        pass,
        format!("{} (need < 4e-5 and < 0.01)", parts.join("; ")),
    );
    Ok(())
}

fn idealized_gates(s: &mut Suite) -> Result<()> {
    let target = ensemble_cnot_matrix();
    let ideal = |chi| EnsembleOperators::idealized(LogicalEncoding::new(chi));
    let u = cnot_matrix(&ideal(0.0), &ideal(0.0))?;
    let exact = u == target;
    let unitarity = max_deviation(&(u.adjoint() * &u), &Operator::identity(4, 4));
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst_chi = 0.0f64;
    for _ in 0..200 {
        let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        worst_chi = worst_chi.max(max_deviation(&cnot_matrix(&ideal(a), &ideal(b))?, &target));
    }
    s.record(
        "11",
        "idealized ensemble CNOT",
        exact && unitarity <= 1e-15 && worst_chi <= 1e-15,
        format!(
            "matrix equal to target: {exact}; ‖U†U - I‖max = {unitarity:.1e} (<= 1e-15); max deviation over 200 random encoding phases {worst_chi:.1e}"
        ),
    );
    Ok(())
}

fn forster_cz(s: &mut Suite) -> Result<()> {
    let m = presets::fig12(&s.options)?.summary;
    let p = &m.passage;
    s.record(
        "12a",
        "Förster passage returns to the initial channel",
        p.population_error < 1e-3,
        format!(
            "population error {:.3e} (< 1e-3); max adiabaticity margin {:.3}, window [{:.4}, {:.4}] µs",
            p.population_error, p.max_margin, p.window_us[0], p.window_us[1]
        ),
    );
    let entangling = m.gate.entangling_phase;
    s.record(
        "12b",
        "Förster CZ entangling phase",
        circular(entangling, PI) < 0.02,
        format!(
            "φ11-φ10-φ01+φ00 = {entangling:.6} (|·-π| = {:.1e} < 0.02), gate fidelity {:.6}",
            circular(entangling, PI),
            m.gate.fidelity
        ),
    );
    let t = &m.sensitivity;
    s.record(
        "12c",
        "Förster phase under ±10% distance changes",
        t.max_phase_deviation < t.tolerance,
        format!(
            "max |φ-π| = {:.1e} (< {}), population errors [{}]",
            t.max_phase_deviation,
            t.tolerance,
            t.rows
                .iter()
                .map(|r| format!("{:+.0}%: {:.2e}", 100.0 * r.relative_change, r.population_error))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    Ok(())
}

/// Largest amplitude difference between a symmetric-basis run and the
/// symmetric projection of the same scenario run in the full basis,
/// together with the population the full run leaks out of the subspace.
fn representation_gap(symmetric: &ScenarioConfig) -> Result<(f64, f64)> {
    let mut full = symmetric.clone();
    full.model.representation = RepresentationSpec::Full;
    let sym_run = run_scenario(symmetric)?;
    let full_run = run_scenario(&full)?;
    let basis = full_run.model.basis().expect("ensemble models carry a basis");
    let mut gap = 0.0f64;
    let mut leakage = 0.0f64;
    for (a, b) in sym_run
        .trajectory
        .amplitudes
        .iter()
        .zip(&full_run.trajectory.amplitudes)
    {
        let (projected, leak) = project_to_symmetric(basis, &CollectiveState::new(b.clone()))?;
        leakage = leakage.max(leak);
        for (x, y) in a.iter().zip(&projected.amplitudes) {
            gap = gap.max((x - y).norm());
        }
    }
    Ok((gap, leakage))
}

fn oracle_equivalence(s: &mut Suite) -> Result<()> {
    let steps = s.options.steps_per_us.unwrap_or(1e4);
    let fast = s.options.steps_per_us.unwrap_or(5e4);
    let mut configs: Vec<(String, ScenarioConfig)> = Vec::new();
    for n in [2, 3] {
        configs.push((format!("fig3a N={n}"), presets::fig3a_config(n, steps)));
        for &(pump, stokes) in &STIRAP_ORDERINGS {
            for (name, detuning, density) in [("fig3b", 0.0, steps), ("fig3c", 200.0, fast)] {
                let label = format!("{name} p{pump}/s{stokes} N={n}");
                configs.push((
                    label.clone(),
                    presets::stirap_config(label, n, pump, stokes, detuning, density),
                ));
            }
        }
    }
    let results = rydpass::parallel::map(s.options.execution, &configs, |(_, c)| representation_gap(c));
    let mut worst: (f64, &str) = (0.0, "");
    let mut worst_leak = 0.0f64;
    for ((label, _), r) in configs.iter().zip(results) {
        let (gap, leak) = r?;
        if gap >= worst.0 {
            worst = (gap, label);
        }
        worst_leak = worst_leak.max(leak);
    }
    s.record(
        "13",
        "symmetric basis against full basis",
        worst.0 < 1e-8,
        format!(
            "max amplitude difference over {} runs {:.1e} (< 1e-8, worst {}), max leakage out of the symmetric subspace {:.1e}",
            configs.len(),
            worst.0,
            worst.1,
            worst_leak
        ),
    );
    Ok(())
}

type Criterion = (&'static str, &'static str, fn(&mut Suite) -> Result<()>);

const CRITERIA: [Criterion; 13] = [
    ("1", "ARP inversion", arp_inversion),
    ("2", "ARP independent of N", n_independence),
    ("3", "dark-state failure", dark_state_failure),
    ("4", "regime switch", regime_switch),
    ("5", "optimized STIRAP", optimized_stirap),
    ("6", "double ARP phase", double_arp_phase),
    ("7", "phase cancellation", phase_cancellation),
    ("8", "Poisson loading", poisson_loading),
    ("9", "π pulse against adiabatic passage", pi_pulse_vs_adiabatic),
    ("10", "nonlinear-detuning double ARP", nonlinear_double_arp),
    ("11", "idealized gates", idealized_gates),
    ("12", "Förster CZ", forster_cz),
    ("13", "symmetric basis against full basis", oracle_equivalence),
];

fn main() -> ExitCode {
    let mut suite = Suite {
        outcomes: Vec::new(),
        options: PresetOptions {
            steps_per_us: None,
            execution: Execution::Parallel,
        },
    };
    let (_, total) = timed(|| {
        for (id, title, check) in CRITERIA {
            if let Err(e) = check(&mut suite) {
                suite.error(id, title, e);
            }
        }
    });
    let failed: Vec<&Outcome> = suite.outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {} passed, {} failed in {:.1} s",
        suite.outcomes.len() - failed.len(),
        failed.len(),
        total.as_secs_f64()
    );
    for o in &failed {
        println!("  failed {} {}: {}", o.id, o.title, o.detail);
    }
    let strict = std::env::var("RYDPASS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
