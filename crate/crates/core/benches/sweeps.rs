use std::hint::black_box;

use cotc_core::bifurcation::pdb_boundary_exact;
use cotc_core::fixtures::{self, EXAMPLE1_ON_TIME, EXAMPLE4_VO};
use cotc_core::harmonic::hb_pdb_splot;
use cotc_core::sweep::{sweep, Range};
use cotc_core::{build_model, Execution, Scheme};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn duty_sweeps(c: &mut Criterion) {
    let p = fixtures::example1();
    let m = build_model(&p, Scheme::VCotc).unwrap();
    let d = EXAMPLE1_ON_TIME;
    let range = Range::new(0.2, 0.95, 400).unwrap();

    let mut group = c.benchmark_group("exact_pdb_over_duty");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                sweep(range, exec, |duty| pdb_boundary_exact(&m, EXAMPLE4_VO / duty, d, d / duty))
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("harmonic_pdb_over_duty");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                sweep(black_box(range), exec, |duty| {
                    let q = p.with_vs(EXAMPLE4_VO / duty);
                    Ok(hb_pdb_splot(&q, Scheme::VCotc, d, d / duty, 2000)?.value)
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, duty_sweeps);
criterion_main!(benches);
