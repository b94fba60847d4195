//! Per-step kernels on a 128² mesh, on the default rayon pool and on a
//! single-thread pool.
//!
//! Built without the `parallel` feature only the sequential variant runs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sqg_fem::scenarios::{initial_field, Profile};
use sqg_fem::transport::{
    euler_step, low_order_viscosity, select_dt, ssprk3_step, SchemeKind, TransportConfig,
    TransportState, VelocitySource,
};
use sqg_fem::velocity::velocity_of;
use sqg_fem::{FemSystem, SincQuadrature, SolverKind, VelocityMode};

const N_SIDE: usize = 128;

struct Fixture {
    sys: FemSystem,
    theta: Vec<f64>,
    cfg: TransportConfig,
}

fn fixture() -> Fixture {
    let sys = FemSystem::uniform(N_SIDE, SolverKind::Spectral).expect("mesh");
    let theta = initial_field(&sys.ops, Profile::SingleVortex, 0);
    let cfg = TransportConfig {
        scheme: SchemeKind::Fct,
        velocity: VelocitySource::Computed(VelocityMode::Sqg),
        cfl: 0.4,
        ..TransportConfig::default()
    };
    Fixture { sys, theta, cfg }
}

#[cfg(feature = "parallel")]
type Pool = rayon::ThreadPool;

#[cfg(not(feature = "parallel"))]
enum Pool {}

/// Runs `f` on `pool`, or on the global pool when `None`.
fn on<R: Send>(pool: Option<&Pool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        #[cfg(feature = "parallel")]
        Some(p) => p.install(f),
        #[cfg(not(feature = "parallel"))]
        Some(p) => match *p {},
        None => f(),
    }
}

fn kernels(c: &mut Criterion, f: &Fixture, variant: &str, pool: Option<&Pool>) {
    let q = SincQuadrature::standard();
    let (_, u) = velocity_of(&f.sys, &f.theta, VelocityMode::Sqg, q).expect("velocity");
    let dl = low_order_viscosity(&f.sys.ops, &u);
    let dt = select_dt(&dl, &f.sys.ops.lumped, f.cfg.cfl, f.cfg.dt_max).dt;
    let state = TransportState::new(f.theta.clone());

    let mut g = c.benchmark_group("kernels");
    g.sample_size(20);
    g.bench_function(BenchmarkId::new("velocity", variant), |b| {
        b.iter(|| {
            on(pool, || {
                velocity_of(&f.sys, black_box(&f.theta), VelocityMode::Sqg, q)
            })
        })
    });
    g.bench_function(BenchmarkId::new("low_order_viscosity", variant), |b| {
        b.iter(|| on(pool, || low_order_viscosity(&f.sys.ops, black_box(&u))))
    });
    g.bench_function(BenchmarkId::new("fct_euler", variant), |b| {
        b.iter(|| {
            on(pool, || {
                euler_step(&f.sys, black_box(&f.theta), &u, Some(&dl), dt, &f.cfg)
            })
        })
    });
    g.bench_function(BenchmarkId::new("ssprk3_step", variant), |b| {
        b.iter(|| {
            on(pool, || {
                ssprk3_step(&f.sys, black_box(&state), &f.cfg, f64::INFINITY)
            })
        })
    });
    g.finish();
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    let f = fixture();
    kernels(c, &f, "rayon", None);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    kernels(c, &f, "sequential", Some(&single));
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    kernels(c, &fixture(), "sequential", None);
}

criterion_group!(benches, bench);
criterion_main!(benches);
