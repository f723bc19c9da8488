use std::f64::consts::FRAC_1_SQRT_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use catlink_core::channel::{loss_step, propagate_discrete, to_density_matrix};
use catlink_core::device::{purify_pair, FeedbackEngine};
use catlink_core::fock::coherent_state;
use catlink_core::preparation::{local_cutoffs, prepare_entangled_cats};
use catlink_core::qubit::{mean_steps, run_walk, walk_rng};
use catlink_core::{default_cutoff, ChannelSpec, DeviceOutcome, ParamState, C64};
use rand::Rng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn fock_kernels(cr: &mut Criterion) {
    let alpha = c(2.0);
    let n = default_cutoff(alpha);
    let pair = coherent_state(alpha, n)
        .unwrap()
        .tensor(&coherent_state(-alpha, n).unwrap())
        .unwrap();
    cr.bench_function("beam_splitter_apply_2x25", |b| {
        b.iter(|| {
            black_box(&pair)
                .apply_beam_splitter(0, 1, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2))
                .unwrap()
        })
    });
    cr.bench_function("cross_kerr_2x25", |b| {
        b.iter(|| black_box(&pair).apply_cross_kerr(0, 1).unwrap())
    });

    let rho = to_density_matrix(&ParamState::pure(alpha), n).unwrap();
    cr.bench_function("kraus_loss_step_2x25", |b| {
        b.iter(|| loss_step(black_box(&rho), 0, 0.99, 6).unwrap())
    });

    let spec = ChannelSpec::new(0.95, 0.95, 1.0, 0.5, 4).unwrap();
    let mut g = cr.benchmark_group("slow");
    g.sample_size(10);
    g.bench_function("propagate_discrete_4_steps", |b| {
        b.iter(|| propagate_discrete(black_box(&rho), &spec).unwrap())
    });
    let h = c(FRAC_1_SQRT_2);
    let modes = local_cutoffs(alpha, h).unwrap();
    g.bench_function("prepare_entangled_cats_alpha2", |b| {
        b.iter(|| prepare_entangled_cats(alpha, h, h, h, black_box(&modes)).unwrap())
    });
    g.finish();
}

fn device_kernels(cr: &mut Criterion) {
    let alpha = c(2.5);
    let n = default_cutoff(alpha);
    let signal = ParamState::pure(alpha).with_r(0.6).unwrap();
    let outcome = DeviceOutcome::new(0, 1, 1, 0).unwrap();
    let mut g = cr.benchmark_group("device");
    g.sample_size(20);
    g.bench_function("purify_pair_fock_alpha2.5", |b| {
        b.iter(|| purify_pair(black_box(&signal), 0.6, &outcome, alpha, n).unwrap())
    });
    g.finish();

    let engine = FeedbackEngine::new(0.6, alpha).unwrap();
    let rho = engine.signal(0.6).unwrap();
    let mut rng = walk_rng(1, 0);
    cr.bench_function("cat_engine_step", |b| {
        b.iter(|| engine.step(black_box(&rho), rng.random::<f64>()).unwrap())
    });
}

fn walks(cr: &mut Criterion) {
    cr.bench_function("run_walk_r0.5", |b| {
        b.iter(|| run_walk(0.5, 1e-5, 1_000_000, black_box(7)).unwrap())
    });
    let mut g = cr.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("mean_steps_r0.5_1e4", |b| {
        b.iter(|| mean_steps(0.5, 1e-5, 10_000, black_box(1)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, fock_kernels, device_kernels, walks);
criterion_main!(benches);
