use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dnngpc::gpc::{compute_coeffs, CoeffOptions, TargetFunction};
use dnngpc::index_sets::DownwardClosedSet;
use dnngpc::tensor::{build_tensor_hermite, TensorL2Method};
use dnngpc::Exec;
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn batch_eval(c: &mut Criterion) {
    let t = build_tensor_hermite(&DownwardClosedSet::tensor_box(&[2, 2]), 1e-2, Exec::Parallel).unwrap();
    let mut g = c.benchmark_group("tensor_mc_errors");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| t.l2_errors(&TensorL2Method::MonteCarlo { samples: 2000, seed: 7 }, exec).unwrap())
        });
    }
    g.finish();
}

fn coefficients(c: &mut Criterion) {
    let f = TargetFunction::new("exp", 3, |y| (y.iter().sum::<f64>() / 3.0).exp());
    let lambda = DownwardClosedSet::total_degree(3, 5);
    let opts = CoeffOptions { q_extra: 4, ..Default::default() };
    let mut g = c.benchmark_group("tensor_coefficients");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| compute_coeffs(black_box(&f), &lambda, &opts, exec).unwrap())
        });
    }
    g.finish();
}

fn construction(c: &mut Criterion) {
    let lambda = DownwardClosedSet::total_degree(3, 4);
    let mut g = c.benchmark_group("tensor_build");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_tensor_hermite(black_box(&lambda), 1e-2, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, batch_eval, coefficients, construction);
criterion_main!(benches);
