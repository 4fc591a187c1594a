use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpgstar::acoustics::{AcousticsConfig, Goal};
use dpgstar::solver::{self, Discretization, Method};
use dpgstar::Execution;

fn element_stage(c: &mut Criterion) {
    let mut group = c.benchmark_group("condense_all");
    group.sample_size(10);
    for (nx, p, dp) in [(4, 3, 1), (8, 3, 2)] {
        let base = Discretization::new(AcousticsConfig::new(2.0, 40.0, p, dp), nx, nx).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let disc = base.clone().with_execution(exec);
            let id = BenchmarkId::new(format!("{exec:?}"), format!("{nx}x{nx}_p{p}_dp{dp}"));
            group.bench_with_input(id, &disc, |b, d| {
                b.iter(|| solver::condense_all(d).unwrap())
            });
        }
    }
    group.finish();
}

fn full_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("dpg_solve");
    group.sample_size(10);
    let base = Discretization::new(AcousticsConfig::new(2.0, 40.0, 3, 1), 8, 8).unwrap();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let disc = base.clone().with_execution(exec);
        group.bench_with_input(
            BenchmarkId::new(format!("{exec:?}"), "8x8_p3_dp1"),
            &disc,
            |b, d| b.iter(|| solver::run(d, Method::Dpg, &Goal::Manufactured).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, element_stage, full_solve);
criterion_main!(benches);
