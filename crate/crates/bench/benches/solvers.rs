use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nonlocal_bench::{fractional, unit_forms};
use nonlocal_core::{dtn_matrix, eig, solve, ComplementProblem, Condition, FunctionSpec, ProblemKind, TailMode};

fn solvers(c: &mut Criterion) {
    let k = fractional(1.2);
    let one = FunctionSpec::Constant { value: 1.0 }.build().unwrap();
    let zero = FunctionSpec::Constant { value: 0.0 }.build().unwrap();
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    for n in [64, 128, 256] {
        let fm = unit_forms(&k, n, TailMode::Drop);
        let dirichlet = ComplementProblem::new(ProblemKind::Dirichlet, one.clone(), zero.clone());
        g.bench_with_input(BenchmarkId::new("dirichlet_solve", n), &fm, |b, fm| {
            b.iter(|| solve(fm, &dirichlet).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("neumann_eig_10", n), &fm, |b, fm| {
            b.iter(|| eig(fm, &Condition::Neumann, 10).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("dtn_matrix", n), &fm, |b, fm| {
            b.iter(|| dtn_matrix(fm, 0.0).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, solvers);
criterion_main!(benches);
