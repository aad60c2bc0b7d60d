use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use quasilab_core::{
    builtin_model, liouville_builder, lyapunov, periodicity_defects, random_sl2, random_unit, simon_bound_check,
    transfer, BuiltinModel, Frequency, ModelParams, TransferRequest,
};

fn transfer_matrices(c: &mut Criterion) {
    let f = liouville_builder(1.0, 4).unwrap();
    let mut group = c.benchmark_group("transfer_length_100");
    for m in [BuiltinModel::Cosine, BuiltinModel::Sawtooth] {
        let spec = builtin_model(m, &ModelParams::lambda(1.0)).unwrap();
        group.bench_function(BenchmarkId::from_parameter(m.name()), |b| {
            b.iter(|| transfer(&spec, &f, &TransferRequest::new(black_box(0.5), 0.0, 100.0)).unwrap())
        });
    }
    group.finish();
}

fn lyapunov_estimate(c: &mut Criterion) {
    let f = Frequency::golden_mean(30).unwrap();
    let spec = builtin_model(BuiltinModel::Cosine, &ModelParams::lambda(2.0)).unwrap();
    c.bench_function("lyapunov_length_200_phases_8", |b| {
        b.iter(|| lyapunov(&spec, &f, black_box(1.0), 200.0, 8, 1e-3).unwrap())
    });
}

fn defects(c: &mut Criterion) {
    let f = liouville_builder(1.0, 4).unwrap();
    let spec = builtin_model(BuiltinModel::Cosine, &ModelParams::lambda(1.0)).unwrap();
    c.bench_function("periodicity_defects_q_4", |b| {
        b.iter(|| periodicity_defects(&spec, &f, black_box(0.5), 4, 1e-3).unwrap())
    });
}

fn builder(c: &mut Criterion) {
    c.bench_function("liouville_builder_beta_1_depth_4", |b| {
        b.iter(|| liouville_builder(black_box(1.0), 4).unwrap())
    });
}

fn simon_fuzz(c: &mut Criterion) {
    c.bench_function("simon_check_1000", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..1000 {
                let m = random_sl2(&mut rng, 1e3);
                let phi = random_unit(&mut rng);
                black_box(simon_bound_check(&m, &phi).unwrap());
            }
        })
    });
}

criterion_group!(benches, transfer_matrices, lyapunov_estimate, defects, builder, simon_fuzz);
criterion_main!(benches);
