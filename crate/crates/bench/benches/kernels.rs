use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ricci2d::exact::{cigar_u_cyl, CigarModel, CylCoord, SphereModel};
use ricci2d::flow::{step, BoundaryCondition, ExactReference, FlowState, RadialFlow, StepControl};
use ricci2d::geometry::{gauss_curvature, laplacian, DistanceField, Stencil};
use ricci2d::{ConformalChart, ScalarField};

fn cigar_field(cells_per_unit: usize) -> ScalarField {
    let n_ell = 12 * cells_per_unit + 1;
    let chart = ConformalChart::cylindrical([-4.0, 8.0], n_ell, 16).unwrap();
    ScalarField::from_fn(chart, |ell, th| cigar_u_cyl(0.0, CylCoord::new(ell, th))).unwrap()
}

fn stencils(c: &mut Criterion) {
    let mut g = c.benchmark_group("stencil");
    for cpu in [8, 32] {
        let u = cigar_field(cpu);
        g.bench_with_input(BenchmarkId::new("laplacian", cpu), &u, |b, u| b.iter(|| laplacian(black_box(u))));
        g.bench_with_input(BenchmarkId::new("gauss_curvature", cpu), &u, |b, u| {
            b.iter(|| gauss_curvature(black_box(u)))
        });
    }
    g.finish();
}

fn time_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    let u = cigar_field(8);
    let bc = BoundaryCondition::exact(ExactReference::Cigar(CigarModel::unit(8.0)));
    let state = FlowState::new(0.0, u, bc).unwrap();
    g.bench_function("explicit", |b| b.iter(|| step(black_box(&state), &StepControl::explicit()).unwrap()));
    let implicit = StepControl::implicit(0.01);
    g.bench_function("implicit_newton", |b| b.iter(|| step(black_box(&state), &implicit).unwrap()));

    let sphere = RadialFlow::new(&SphereModel::capped(1.0).unwrap(), 100).unwrap();
    g.bench_function("radial_explicit", |b| {
        b.iter_batched_ref(
            || sphere.clone(),
            |f| f.step(&StepControl::explicit()).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn distances(c: &mut Criterion) {
    let mut g = c.benchmark_group("dijkstra");
    for cpu in [8, 16] {
        let u = cigar_field(cpu);
        let tip = u.chart().node(0);
        g.bench_with_input(BenchmarkId::new("single_source", cpu), &u, |b, u| {
            b.iter(|| DistanceField::from_node(black_box(u), tip, Stencil::default()))
        });
    }
    g.finish();
}

criterion_group!(benches, stencils, time_steps, distances);
criterion_main!(benches);
