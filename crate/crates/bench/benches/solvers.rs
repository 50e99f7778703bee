use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use steklov_core::profile::{Family, MetricFamily, Profile, ProfileLabel};
use steklov_core::rayleigh::grid::BumpScenario;
use steklov_core::spectrum::steklov_spectrum;
use steklov_core::{CrossSection, CrossSectionComponent, MeshControl, ModeProblem, ProblemKind, SpectrumRequest};

fn torus() -> CrossSection {
    CrossSection::single(CrossSectionComponent::flat_torus(&[std::f64::consts::TAU; 2]).unwrap())
}

fn conf1(eps: f64) -> MetricFamily {
    MetricFamily::new(Family::Conformal, 2, Profile::make(ProfileLabel::Conf1, eps, 1.0, false).unwrap())
}

fn dtn(c: &mut Criterion) {
    let mut group = c.benchmark_group("dtn_matrix");
    for eps in [0.1, 0.0125] {
        let mp = ModeProblem::two_sided(4.0, conf1(eps)).unwrap();
        let mesh = mp.mesh(&MeshControl::default()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(eps), &mesh, |b, mesh| {
            b.iter(|| mp.dtn_matrix(black_box(mesh)).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("steklov_spectrum");
    group.sample_size(20);
    for eps in [0.1, 0.0125] {
        let req = SpectrumRequest::new(torus(), conf1(eps), ProblemKind::SteklovTwoSided, 10);
        group.bench_with_input(BenchmarkId::from_parameter(eps), &req, |b, req| {
            b.iter(|| steklov_spectrum(black_box(req)).unwrap())
        });
    }
    group.finish();
}

fn grid_gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("bump_gram");
    group.sample_size(10);
    for resolution in [32, 64] {
        let scenario = BumpScenario {
            resolution,
            bump_elements: 10,
            ..BumpScenario::default()
        };
        let problem = scenario.problem(100.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(resolution), &problem, |b, p| {
            b.iter(|| p.gram().unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dtn, spectrum, grid_gram);
criterion_main!(benches);
