//! Criterion benchmarks comparing the rayon-backed parallel execution path
//! against the sequential fallback on representative workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use wqp::exec::{map_indexed, Exec};
use wqp::params::AlgebraParams;
use wqp::rmatrix::build_rhat;
use wqp::theta::TruncationPolicy;

fn bench_rhat_batch(c: &mut Criterion) {
    let params = AlgebraParams::new(
        3,
        Complex64::new(0.4, 0.0),
        Complex64::new(0.09, 0.0),
        Complex64::new(-3.0, 0.0),
    )
    .unwrap();
    let policy = TruncationPolicy::default();
    let count = 24usize;
    let mut group = c.benchmark_group("rhat_batch");
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(
            BenchmarkId::new("build_rhat", format!("{exec:?}")),
            &exec,
            |b, &exec| {
                b.iter(|| {
                    let vals = map_indexed(exec, count, |k| {
                        let t = 0.85 + 0.3 * (k as f64) / (count as f64);
                        let z = Complex64::new(t, 0.11);
                        build_rhat(z, &params, &policy).unwrap().frobenius()
                    });
                    vals.iter().sum::<f64>()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_rhat_batch);
criterion_main!(benches);
