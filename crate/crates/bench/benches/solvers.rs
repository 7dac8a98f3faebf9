use apgcert::outer::OuterParams;
use apgcert::problems::domain_point;
use apgcert::{apg_terminating, ppa_unconstrained, project_dual, prox, prox_al, ApgParams, ProxKind};
use apgcert_bench::{constrained, mixed_cone, quartic};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn apg_cert(c: &mut Criterion) {
    let mut g = c.benchmark_group("apg_terminating");
    for n in [10, 50, 200] {
        let p = quartic(n, 1.0, ProxKind::L1 { weight: 0.05 });
        let x0 = domain_point(&p);
        let params = ApgParams {
            epsilon: 1e-6,
            ..ApgParams::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| apg_terminating(&p, &params, black_box(&x0)).unwrap())
        });
    }
    g.finish();
}

fn ppa(c: &mut Criterion) {
    let p = quartic(50, 0.0, ProxKind::Zero);
    let x0 = domain_point(&p);
    let params = OuterParams::ppa_defaults(1e-4);
    c.bench_function("ppa_unconstrained/50", |b| {
        b.iter(|| ppa_unconstrained(&p, &params, black_box(&x0)).unwrap())
    });
}

fn proximal_al(c: &mut Criterion) {
    let conic = constrained(20, 5, 3);
    let x0 = domain_point(&conic.base);
    let l0 = vec![0.0; conic.num_constraints()];
    let params = OuterParams::prox_al_defaults(1e-4, conic.base.mu);
    c.bench_function("prox_al/20x8", |b| {
        b.iter(|| prox_al(&conic, &params, black_box(&x0), &l0).unwrap())
    });
}

fn kernels(c: &mut Criterion) {
    let cone = mixed_cone(250);
    let u: Vec<f64> = (0..cone.dim())
        .map(|i| ((i * 37 % 101) as f64 - 50.0) / 25.0)
        .collect();
    c.bench_function("project_dual/1000", |b| {
        b.iter(|| project_dual(&cone, black_box(&u)).unwrap())
    });
    let l1 = ProxKind::L1 { weight: 0.3 };
    c.bench_function("prox_l1/1000", |b| {
        b.iter(|| prox(&l1, 0.5, black_box(&u)).unwrap())
    });
}

criterion_group!(benches, apg_cert, ppa, proximal_al, kernels);
criterion_main!(benches);
