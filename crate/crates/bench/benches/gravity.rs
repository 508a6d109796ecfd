use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use accrete_bench::{seeded_state, unit_grid};
use accrete_core::gravity::{solve_potential_direct, solve_potential_fast};
use accrete_core::{ConstitutiveModel, GravityContext, GravityMethod};

fn gravity(c: &mut Criterion) {
    let model = ConstitutiveModel::default();
    let mut group = c.benchmark_group("gravity");
    group.sample_size(10);
    for n in [16usize, 32, 64] {
        let grid = unit_grid(n);
        let rho = seeded_state(&grid, &model).rho;
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        // Build the kernel tables outside the timed loop.
        solve_potential_fast(&ctx, &rho, &grid);
        group.bench_with_input(BenchmarkId::new("fast", n), &n, |b, _| {
            b.iter(|| solve_potential_fast(&ctx, &rho, &grid))
        });
        if n <= 16 {
            group.bench_with_input(BenchmarkId::new("direct", n), &n, |b, _| {
                b.iter(|| solve_potential_direct(&ctx, &rho, &grid))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, gravity);
criterion_main!(benches);
