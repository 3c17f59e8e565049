use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use brokenpde::{
    circle_integral, disk_integral, extract_nodal, frequency, phi_s_inverse, picard_solve,
    vanishing_order, Expr, FrequencyFields, GridSpec, ScalarField,
};
use brokenpde_bench::{expr, jump_problem};

fn bench_expr(c: &mut Criterion) {
    let e = expr("1.5 + 0.25*((x + 1.2)^2)^0.25 + 0.1*sin(3*x)*cos(y)");
    c.bench_function("expr parse", |b| {
        b.iter(|| Expr::parse(black_box("1.5 + 0.25*((x + 1.2)^2)^0.25")).unwrap())
    });
    c.bench_function("expr eval 1k points", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..1000 {
                let x = -1.0 + 2.0 * k as f64 / 999.0;
                acc += e.evaluate(black_box(x), 0.3).unwrap();
            }
            acc
        })
    });
}

fn bench_solver(c: &mut Criterion) {
    let p = jump_problem(33);
    let mut group = c.benchmark_group("solver");
    group.sample_size(20);
    group.bench_function("picard jump n=33", |b| {
        b.iter(|| picard_solve(black_box(&p)).unwrap())
    });
    group.finish();
}

fn bench_quadrature(c: &mut Criterion) {
    let grid = GridSpec::square(-1.0, 1.0, 257).unwrap();
    let f = ScalarField::sample(&expr("x^2 - y^2"), &grid).unwrap();
    c.bench_function("circle integral r=0.4 n=257", |b| {
        b.iter(|| circle_integral(black_box(&f), [0.0, 0.0], 0.4).unwrap())
    });
    c.bench_function("disk integral r=0.4 n=257", |b| {
        b.iter(|| disk_integral(black_box(&f), [0.0, 0.0], 0.4).unwrap())
    });
}

fn bench_nodal(c: &mut Criterion) {
    let grid = GridSpec::square(-1.0, 1.0, 257).unwrap();
    let u = ScalarField::sample(&expr("x^2 - y^2 + 0.1"), &grid).unwrap();
    c.bench_function("marching squares n=257", |b| {
        b.iter(|| extract_nodal(black_box(&u)))
    });
}

fn bench_analysis(c: &mut Criterion) {
    let grid = GridSpec::square(-1.0, 1.0, 257).unwrap();
    let w = ScalarField::sample(&expr("x^2 - y^2"), &grid).unwrap();
    let fields = FrequencyFields::new(&w);
    c.bench_function("frequency triple r=0.3 n=257", |b| {
        b.iter(|| frequency(black_box(&fields), [0.0, 0.0], 0.3).unwrap())
    });
    c.bench_function("vanishing order n=257", |b| {
        b.iter(|| vanishing_order(black_box(&w), [0.0, 0.0], 0.4, 4).unwrap())
    });
    c.bench_function("phi_s inverse 1k values", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..1000 {
                let v = -3.0 + 6.0 * k as f64 / 999.0;
                acc += phi_s_inverse(black_box(v), 1.3, 0.8, 0.5);
            }
            acc
        })
    });
}

criterion_group!(
    benches,
    bench_expr,
    bench_solver,
    bench_quadrature,
    bench_nodal,
    bench_analysis
);
criterion_main!(benches);
