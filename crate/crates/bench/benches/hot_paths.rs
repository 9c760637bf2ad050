use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kinswarm::diagnostics::{es_table, hminus_s_norm, HmsMethod};
use kinswarm::grid::{BoxGrid, GridField};
use kinswarm::kernels::KernelSpec;
use kinswarm::minimizers::explicit_radial_minimizer;
use kinswarm::pairs::pair_energy_gradient;
use kinswarm::simulator::{default_delta, well_prepared_initial_data, ExternalFieldSpec, Integrator, SimConfig};
use std::hint::black_box;

fn pair_forces(c: &mut Criterion) {
    let mut group = c.benchmark_group("pair_energy_gradient");
    let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap().with_delta(0.01);
    let k = spec.prepared();
    for n in [500usize, 2000] {
        let x: Vec<f64> = (0..2 * n).map(|i| ((i as f64) * 0.618_033_988_7).fract() - 0.5).collect();
        let mut g = vec![0.0; x.len()];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(pair_energy_gradient(&k, black_box(&x), &mut g)))
        });
    }
    group.finish();
}

fn strang_step(c: &mut Criterion) {
    let base = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
    let profile = explicit_radial_minimizer(&base, 1.0).unwrap();
    let n = 1000;
    let spec = base.with_delta(default_delta(profile.semi_axes()[0], n, 2));
    let mut state =
        well_prepared_initial_data(&profile, &[0.0, 0.0], &ExternalFieldSpec::Zero, n, 0.1, 1).unwrap();
    let cfg = SimConfig {
        epsilon: 0.05,
        lambda_drag: 1.0,
        dt: 1e-3,
        t_final: 1.0,
        kernel: spec,
        external_field: ExternalFieldSpec::Zero,
        seed: 1,
    };
    let mut it = Integrator::new(&cfg, &state).unwrap();
    c.bench_function("integrator_step_n1000", |b| b.iter(|| it.step(&mut state).unwrap()));
}

fn bump(m: usize) -> GridField {
    let grid = BoxGrid::centered(&[0.0, 0.0], 2.0, m).unwrap();
    GridField::sample(grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (-4.0 * r2).exp() * (1.0 - 4.0 * r2)
    })
}

fn hms(c: &mut Criterion) {
    let mut group = c.benchmark_group("hminus_s");
    group.sample_size(10);
    let mu = bump(64);
    group.bench_function("table_build_64", |b| b.iter(|| es_table([64, 64], mu.grid.h, 0.5).unwrap()));
    let table = es_table([64, 64], mu.grid.h, 0.5).unwrap();
    let q = mu.masses();
    group.bench_function("table_quadratic_64", |b| b.iter(|| table.quadratic(black_box(&q)).unwrap()));
    group.bench_function("fourier_64", |b| {
        b.iter(|| hminus_s_norm(black_box(&mu), 0.5, HmsMethod::FourierQuadrature).unwrap())
    });
    group.finish();
}

criterion_group!(benches, pair_forces, strang_step, hms);
criterion_main!(benches);
