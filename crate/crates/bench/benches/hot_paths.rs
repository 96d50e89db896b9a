//! Benchmarks for the operations that dominate study runtimes: drawing a
//! correlated noise trajectory, propagating one realization, evaluating the
//! time-domain overlap functional, the modulation transform, and the
//! analytic second-order correction.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use dephasim_bench::{bench_model, bench_schedule, quarter_turn_field};
use dephasim_core::evolution::{
    default_step, pure_density, realization_unitary, second_order_density,
};
use dephasim_core::functional::{j_time, ModulationSource};
use dephasim_core::linalg::{CVector, ONE};

const WINDING: f64 = 2.0;

fn noise_sampling(c: &mut Criterion) {
    let model = bench_model();
    let duration = 10.0 * model.t_c;
    let grid: Vec<f64> = (0..501).map(|i| duration * i as f64 / 500.0).collect();
    c.bench_function("sample_noise_trajectory_501_nodes", |b| {
        let mut seed = 0_u64;
        b.iter(|| {
            seed += 1;
            black_box(model.sample_realization(black_box(&grid), seed).unwrap())
        })
    });
}

fn propagation(c: &mut Criterion) {
    let model = bench_model();
    let schedule = bench_schedule();
    let step = default_step(&schedule, model.t_c);
    c.bench_function("propagate_one_realization", |b| {
        let mut index = 0_usize;
        b.iter(|| {
            index += 1;
            black_box(realization_unitary(&schedule, &model, 1234, index, step).unwrap())
        })
    });
}

fn overlap_functional(c: &mut Criterion) {
    let model = bench_model();
    let field = quarter_turn_field();
    let src = ModulationSource::Wound { field: &field, winding: WINDING };
    let t = field.duration;
    c.bench_function("overlap_functional_quarter_turn", |b| {
        b.iter(|| black_box(j_time(&model, &src, &src, 0, 0, black_box(t)).unwrap()))
    });
}

fn modulation_transform(c: &mut Criterion) {
    let field = quarter_turn_field();
    let samples = field.sampled_modulation(field.duration, WINDING);
    c.bench_function("modulation_transform_single_frequency", |b| {
        let mut omega = 0.0_f64;
        b.iter(|| {
            omega += 1e-3;
            black_box(samples.fourier(black_box(omega)))
        })
    });
}

fn analytic_correction(c: &mut Criterion) {
    let model = bench_model();
    let schedule = bench_schedule();
    let mut psi = CVector::zeros(8);
    psi[0] = ONE;
    let rho0 = pure_density(&psi);
    c.bench_function("second_order_correction_three_qubits", |b| {
        b.iter(|| black_box(second_order_density(&schedule, &model, &rho0, WINDING).unwrap()))
    });
}

criterion_group!(
    hot_paths,
    noise_sampling,
    propagation,
    overlap_functional,
    modulation_transform,
    analytic_correction
);
criterion_main!(hot_paths);
