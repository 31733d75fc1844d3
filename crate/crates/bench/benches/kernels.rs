use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use charflow_bench::{eikonal, slab_stack};
use charflow_core::applications::trace_ray;
use charflow_core::cauchy::{
    propagate, scalar_grid, solve_strip, CharacteristicPolicy, InitialDataManifold,
};
use charflow_core::flows::{integrate, IntegratorConfig, JetFieldSpec};
use charflow_core::jet_contact::JetPoint;
use charflow_core::odd_symplectic::{matrix_exponential, GeneratorU};

fn bench_matrix_exponential(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = GeneratorU::random(3, 2.0, &mut rng);
    c.bench_function("matrix_exponential n=3 s=1", |b| {
        b.iter(|| matrix_exponential(black_box(&u), black_box(1.0)))
    });
}

fn bench_characteristic_flow(c: &mut Criterion) {
    let h = eikonal(2).hamiltonian();
    let p0 = JetPoint::from_slices(&[0.0, 0.0], &[0.6, 0.8], 0.0);
    let cfg = IntegratorConfig::new(1e-3, 1_000_000).unwrap();
    c.bench_function("characteristic flow n=2, 1000 steps", |b| {
        b.iter(|| {
            integrate(
                &JetFieldSpec::Characteristic(&h),
                black_box(&p0),
                (0.0, 1.0),
                &cfg,
            )
            .unwrap()
        })
    });
}

fn bench_cauchy_sheet(c: &mut Criterion) {
    let h = eikonal(2).hamiltonian();
    let m = InitialDataManifold::analytic(
        2,
        scalar_grid(-1.0, 1.0, 21),
        |l| DVector::from_vec(vec![l[0], 0.0]),
        |_| nalgebra::DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        |_| 0.0,
        |_| DVector::from_vec(vec![0.0]),
    )
    .unwrap();
    let p_guess = DVector::from_vec(vec![0.0, 1.0]);
    let cfg = IntegratorConfig::new(1e-2, 100_000).unwrap();
    c.bench_function("strip + sheet, 21 curves x 150 steps", |b| {
        b.iter(|| {
            let strip = solve_strip(&h, &m, 0.0, black_box(&p_guess), 1e-12, 50).unwrap();
            propagate(&h, &strip, (0.0, 1.5), &cfg, CharacteristicPolicy::Error).unwrap()
        })
    });
}

fn bench_trace_ray(c: &mut Criterion) {
    let med = slab_stack(2);
    let x0 = DVector::from_vec(vec![0.0, 0.5]);
    let y0 = DVector::from_vec(vec![1.2, 1.6]);
    let cfg = IntegratorConfig::new(1e-2, 100_000).unwrap();
    c.bench_function("trace_ray five layers", |b| {
        b.iter(|| trace_ray(&med, black_box(&x0), black_box(&y0), 40.0, &cfg).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_matrix_exponential,
    bench_characteristic_flow,
    bench_cauchy_sheet,
    bench_trace_ray
);
criterion_main!(kernels);
