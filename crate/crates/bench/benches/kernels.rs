use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use kinfrac_core::auxiliary::{CorrectorEval, SpatialProfile, TestFunction, TimeEnvelope};
use kinfrac_core::kinetic_fv::{DetConfig, KineticFv, Scheme};
use kinfrac_core::kinetic_mc::{advance, init_ensemble};
use kinfrac_core::nonlocal::assemble;
use kinfrac_core::{Grid1d, InitialProfile, Model, ModelParams};

fn model(delta: f64) -> Model {
    Model::new(ModelParams {
        nu0_delta: delta,
        ..ModelParams::default()
    })
    .unwrap()
}

fn kinetic(c: &mut Criterion) {
    let m = model(0.3);
    let profile = InitialProfile::Gaussian {
        center: 10.0,
        width: 1.0,
    };
    let solver = KineticFv::new(m.clone(), 256, 257, 400.0, Scheme::Muscl).unwrap();
    let field = solver.initial_field(&profile).unwrap();
    let dt = solver.max_dt(0.05) * DetConfig::default().cfl;
    c.bench_function("fv step 256x257", |b| {
        let mut f = field.clone();
        b.iter(|| solver.step(black_box(&mut f), dt, 0.05).unwrap())
    });
    c.bench_function("mc advance 1e4 particles", |b| {
        b.iter(|| {
            let mut ens = init_ensemble(&m, &profile, 10_000, 1).unwrap();
            advance(&m, &mut ens, 0.1, 0.2).unwrap()
        })
    });
}

fn nonlocal(c: &mut Criterion) {
    let m = model(0.3);
    let grid = Grid1d::new(128, m.domain_length());
    let mut g = c.benchmark_group("nonlocal");
    g.sample_size(10);
    g.bench_function("assemble nx=128 K=8", |b| {
        b.iter(|| assemble(&m, black_box(grid), 8).unwrap())
    });
    g.finish();
}

fn corrector(c: &mut Criterion) {
    let m = model(0.3);
    let phi = TestFunction::new(
        SpatialProfile::Gaussian {
            center: 0.0,
            width: 1.0,
        },
        TimeEnvelope::Bump { t_end: 1.0 },
        None,
    )
    .unwrap();
    let ce = CorrectorEval::new(&m, phi, 0.1).unwrap();
    c.bench_function("chi short flight", |b| {
        b.iter(|| ce.chi(0.3, black_box(0.2), black_box(0.7)).unwrap())
    });
    c.bench_function("chi long flight", |b| {
        b.iter(|| ce.chi(0.3, black_box(0.2), black_box(500.0)).unwrap())
    });
}

criterion_group!(benches, kinetic, nonlocal, corrector);
criterion_main!(benches);
