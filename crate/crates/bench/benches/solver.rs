use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use accrete_bench::{seeded_state, unit_grid};
use accrete_core::solver::{step, Engine};
use accrete_core::state::SourceSpec;
use accrete_core::{ConstitutiveModel, Flux, GravityContext, GravityMethod, Integrator};

fn solver(c: &mut Criterion) {
    let model = ConstitutiveModel::default();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    for n in [16usize, 32] {
        let grid = unit_grid(n);
        let phases = [seeded_state(&grid, &model)];
        let gravity = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        let sources = [SourceSpec::off(1.0)];
        let engine = Engine {
            grid: &grid,
            models: std::slice::from_ref(&model),
            sources: &sources,
            mixture: None,
            gravity: &gravity,
            flux: Flux::Upwind,
        };
        let first = engine.evaluate(&phases).expect("evaluates");
        group.bench_with_input(BenchmarkId::new("evaluate", n), &n, |b, _| {
            b.iter(|| engine.evaluate(&phases).expect("evaluates"))
        });
        group.bench_with_input(BenchmarkId::new("ssp-rk2 step", n), &n, |b, _| {
            b.iter(|| step(&engine, Integrator::SspRk2, &phases, &first, 1e-4).expect("steps"))
        });
    }
    group.finish();
}

criterion_group!(benches, solver);
criterion_main!(benches);
