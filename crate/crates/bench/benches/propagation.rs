// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use weakval_core::lindblad::{nonmarkov_jc, sodium_dissipator, AnalyticChannel};
use weakval_core::linalg::expm;
use weakval_core::meter::{simulate_rabi, Interaction};
use weakval_core::scenarios::{linear_grid, sodium_anomalous_setup};
use weakval_core::weakvalue::{epsilon_setup, trace_over_tau};
use weakval_core::{FockSpace, MeterState, C64};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for dim in [4usize, 16, 36] {
        let a = DMatrix::from_fn(dim, dim, |i, j| {
            let x = ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5;
            C64::new(x, 0.3 * x * x)
        });
        group.bench_with_input(BenchmarkId::from_parameter(dim), &a, |b, a| b.iter(|| expm(black_box(a)).unwrap()));
    }
    group.finish();
}

fn bench_traces(c: &mut Criterion) {
    let setup = sodium_anomalous_setup().unwrap();
    let d = sodium_dissipator(1.0).unwrap();
    let grid = linear_grid(0.0, 10.0, 201);
    c.bench_function("sodium_trace_201", |b| b.iter(|| trace_over_tau(&setup, &d, black_box(&grid)).unwrap()));

    let setup = epsilon_setup(0.01).unwrap();
    let ode = nonmarkov_jc(1.0, 0.5).unwrap();
    let grid = linear_grid(0.0, 5.0, 51);
    c.bench_function("nonmarkov_ode_trace_51", |b| {
        b.iter(|| trace_over_tau(&setup, &ode, black_box(&grid)).unwrap())
    });
}

fn bench_meter(c: &mut Criterion) {
    let setup = epsilon_setup(0.1).unwrap().with_coupling(0.1, 0.1).unwrap();
    let ch = AnalyticChannel::AmplitudeDamping { gamma: 1.0 };
    let mut group = c.benchmark_group("joint_rabi");
    for n_max in [10usize, 20, 40] {
        let fs = FockSpace::new(n_max, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n_max), &fs, |b, fs| {
            b.iter(|| simulate_rabi(&setup, &ch, &MeterState::Number(1), fs, 0.5, Interaction::Exact).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_expm, bench_traces, bench_meter);
criterion_main!(benches);
