use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nonlocal_bench::{fractional, window};
use nonlocal_core::{assemble_forms, build_mesh, TailMode};

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_forms");
    g.sample_size(10);
    for n in [64, 128, 256] {
        let mesh = Arc::new(build_mesh(0.0, 1.0, n, 0.5).unwrap());
        for (name, k) in [("fractional_1.5", fractional(1.5)), ("window_0.1", window(0.1))] {
            g.bench_with_input(BenchmarkId::new(name, n), &mesh, |b, m| {
                b.iter(|| assemble_forms(m.clone(), &k, 4, TailMode::Drop).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, assembly);
criterion_main!(benches);
