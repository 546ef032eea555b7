//! Batch throughput with and without the worker pool.
//!
//! Each group runs the same batch once per execution mode. Build with
//! `--no-default-features` to see the fallback, where both modes are
//! sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rydpass::forster::{distance_sensitivity, ForsterScenario};
use rydpass::parallel::Execution;
use rydpass::propagator::{excitation_table, ExcitationSettings, Protocol};
use rydpass::pulses::{GaussianChirpPulse, StirapPair};
use rydpass::units::mhz;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ensemble_sizes(c: &mut Criterion) {
    let sizes: Vec<usize> = (1..=8).collect();
    let arp = Protocol::Arp(GaussianChirpPulse::new(mhz(2.0), 1.0, 0.0, mhz(1.0)).unwrap().into());
    let stirap = Protocol::Stirap(
        StirapPair::new(mhz(10.0), mhz(10.0), -1.0, 1.0, 1.0, mhz(10.0))
            .unwrap()
            .into(),
    );
    let settings = ExcitationSettings {
        steps_per_us: 2e3,
        ..ExcitationSettings::default()
    };
    let mut group = c.benchmark_group("excitation_table");
    group.sample_size(10);
    for (name, protocol) in [("arp", &arp), ("stirap", &stirap)] {
        for (mode, execution) in MODES {
            group.bench_with_input(BenchmarkId::new(name, mode), &execution, |b, &e| {
                b.iter(|| excitation_table(black_box(&sizes), protocol, &settings, e))
            });
        }
    }
    group.finish();
}

fn forster_distances(c: &mut Criterion) {
    let scenario = ForsterScenario::fig12(mhz(2.0), 2e4).unwrap();
    let changes: Vec<f64> = (-4..=4).map(|k| 0.025 * k as f64).collect();
    let mut group = c.benchmark_group("distance_sensitivity");
    group.sample_size(10);
    for (mode, execution) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(mode), &execution, |b, &e| {
            b.iter(|| distance_sensitivity(&scenario, black_box(&changes), e).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble_sizes, forster_distances);
criterion_main!(benches);
