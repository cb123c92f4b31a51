use criterion::{criterion_group, criterion_main, Criterion};
use shell_lab::energy::build_recovery;
use shell_lab::isospace::generate_mode;
use shell_lab::*;
use shell_lab_bench::{cap, metric_data};

fn assembly(c: &mut Criterion) {
    c.bench_function("surface_build_rings16", |b| b.iter(|| cap(16)));
}

fn solvers(c: &mut Criterion) {
    let s = cap(16);
    let data = metric_data(&s);
    c.bench_function("solve_sym_grad_rings16", |b| b.iter(|| solve_sym_grad(&s, &data).unwrap()));
    c.bench_function("generate_mode_cos2_rings16", |b| {
        b.iter(|| generate_mode(&s, BoundaryMode::Cos(2)).unwrap())
    });
    let v = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
    // The cached matching factorization is built once, outside the timing.
    s.matching_solver().unwrap();
    c.bench_function("match_isometry_rings16_h0.1", |b| {
        b.iter(|| match_isometry(&s, &v, 0.1, 1e-10, 100).unwrap())
    });
}

fn energies(c: &mut Criterion) {
    let s = cap(16);
    let m = MaterialModel::default();
    let v = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
    let matched = match_isometry(&s, &v, 0.1, 1e-10, 100).unwrap();
    let rec = build_recovery(&m, &v, &matched).unwrap();
    c.bench_function("bending_energy_rings16", |b| b.iter(|| bending_energy(&m, &v)));
    c.bench_function("shell_energy_rings16", |b| b.iter(|| shell_energy(&s, &m, &rec, 0.01, 3)));
    let force = ForceSpec::profile(&s, ForceProfile::Shear);
    c.bench_function("optimal_rotation_rings16", |b| b.iter(|| optimal_rotation(&force)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = assembly, solvers, energies
}
criterion_main!(benches);
