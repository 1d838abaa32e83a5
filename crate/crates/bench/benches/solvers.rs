use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lognls_bench::{gaussian, grid, perturbed, skewed_density};
use lognls_core::pde::{GrowthPolicy, LogStepSchedule, Stepper};
use lognls_core::{evolve_gaussian, fp_solve, run_comoving, solve_tau, GaussianInit};
use num_complex::Complex64;

fn strang(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    for (dim, n) in [(1, 1024), (1, 16384), (2, 256), (3, 32)] {
        let g = grid(dim, n, 20.0);
        let mut u = gaussian(g).values;
        let mut stepper = Stepper::new(g, perturbed(), 1e-3).unwrap();
        group.bench_with_input(BenchmarkId::new(format!("d{dim}"), n), &n, |b, _| {
            b.iter(|| stepper.advance(black_box(&mut u), 1))
        });
    }
    group.finish();
}

fn dispersion(c: &mut Criterion) {
    c.bench_function("solve_tau_1e6", |b| {
        b.iter(|| solve_tau(black_box(1.0), 1e6, 1e-10).unwrap())
    });
    let init = GaussianInit::new(
        Complex64::new(1.0, 0.0),
        vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.2)],
        vec![0.0, 0.0],
    )
    .unwrap();
    c.bench_function("evolve_gaussian_2d_1e6", |b| {
        b.iter(|| evolve_gaussian(black_box(&init), 1.0, 1e6, 1e-10).unwrap())
    });
}

fn fokker_planck(c: &mut Criterion) {
    let rho = skewed_density(grid(1, 512, 12.0));
    c.bench_function("fp_solve_1d_s2", |b| {
        b.iter(|| fp_solve(black_box(&rho), 2.0).unwrap())
    });
}

fn comoving(c: &mut Criterion) {
    let u0 = gaussian(grid(1, 256, 15.0));
    let params = perturbed();
    let traj = solve_tau(1.0, 10.0, 1e-10).unwrap();
    let schedule = LogStepSchedule {
        dt_min: 1e-3,
        fraction: 1e-2,
        dt_max: 1.0,
    };
    let mut group = c.benchmark_group("comoving");
    group.sample_size(10);
    group.bench_function("run_to_10", |b| {
        b.iter(|| {
            run_comoving(&u0, &params, &traj, 10.0, &schedule, &[], &GrowthPolicy::default())
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, strang, dispersion, fokker_planck, comoving);
criterion_main!(benches);
