//! Sequential against parallel mode dispatch for the forward solve and a full inversion.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffid_core::discretize::{build_grid, Domain};
use diffid_core::mms::{Scenario, ScenarioKind};
use diffid_core::parabolic::solve_forward;
use diffid_core::picard::run_inversion;
use diffid_core::problem::Settings;
use diffid_core::spectral::SpectralParams;
use diffid_core::Strategy;
use std::f64::consts::PI;

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn scenario(dim: usize, n: usize, nt: usize, modes: usize) -> Scenario {
    let domain = Domain::new(dim, [PI, PI], 0.5).unwrap();
    let counts = vec![n; dim];
    let grid = build_grid(domain, &counts, nt).unwrap();
    let params = SpectralParams::new(modes, 1.0, 64).unwrap();
    Scenario::build(ScenarioKind::MmsB, &grid, params, 1.0).unwrap()
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_forward");
    group.sample_size(10);
    for (label, dim, n, nt, modes) in [("1d_512", 1, 512, 256, 16), ("2d_32", 2, 32, 32, 8)] {
        let s = scenario(dim, n, nt, modes);
        let d = &s.data;
        let a = s.truth_a.as_ref().unwrap();
        for (name, strategy) in STRATEGIES {
            group.bench_with_input(BenchmarkId::new(name, label), &strategy, |b, &strategy| {
                b.iter(|| solve_forward(Some(a), &d.f_modes, &d.phi_modes, &d.grid, d.params, 0.5, strategy).unwrap())
            });
        }
    }
    group.finish();
}

fn inversion(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_inversion");
    group.sample_size(10);
    let s = scenario(1, 256, 128, 16);
    for (name, strategy) in STRATEGIES {
        let settings = Settings {
            force: true,
            strategy,
            ..Settings::default()
        };
        group.bench_function(BenchmarkId::new(name, "1d_256"), |b| {
            b.iter(|| run_inversion(&s.data, &settings).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forward, inversion);
criterion_main!(benches);
