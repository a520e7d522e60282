use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hornspde::domain::{build_grid, BoundaryCurve};
use hornspde::solver::{assemble_operator, step, CoefficientField, ImplicitSystem, NonlinearitySpec, ScalarFunction};
use hornspde::young::lambda_sup;
use hornspde::{grr_functional, FbmMethod, FbmSampler, GrrExponents, TimeGrid};

fn fbm(c: &mut Criterion) {
    let mut g = c.benchmark_group("fbm_sample");
    for n in [256usize, 1024] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        for method in [FbmMethod::Cholesky, FbmMethod::CirculantEmbedding] {
            let s = FbmSampler::new(0.7, grid, method).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("{method:?}"), n), &s, |b, s| {
                let mut seed = 0u64;
                b.iter(|| {
                    seed += 1;
                    black_box(s.sample(seed))
                })
            });
        }
    }
    g.finish();
}

fn pathwise(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let path = FbmSampler::new(0.7, grid, FbmMethod::Cholesky).unwrap().sample(3);
    c.bench_function("lambda_sup/256", |b| b.iter(|| black_box(lambda_sup(&path.values, grid.dt(), 0.45))));
    let exps = GrrExponents::for_increment_bound(0.7, 0.0125).unwrap();
    c.bench_function("grr_functional/256", |b| b.iter(|| black_box(grr_functional(&path.values, grid.dt(), exps))));
}

fn solver_step(c: &mut Criterion) {
    let grid = build_grid(&BoundaryCurve::gaussian(), 2, 3.0, 0.05).unwrap();
    let op = assemble_operator(&grid, &CoefficientField::Isotropic { value: 1.0 }, 0.0).unwrap();
    let system = ImplicitSystem::new(&op, 1.0 / 256.0, 1e-10);
    let nl = NonlinearitySpec {
        g: ScalarFunction::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 },
        h: ScalarFunction::Affine { slope: 0.5, offset: 1.0 },
        gamma: 1.0,
    };
    let u: Vec<f64> = grid.nodes.iter().map(|n| (-n.position[0]).exp()).collect();
    let dw: Vec<f64> = (0..grid.n_nodes()).map(|i| 1e-2 * ((i as f64) * 0.37).sin()).collect();
    c.bench_function(&format!("step/{}-nodes", grid.n_nodes()), |b| b.iter(|| black_box(step(&u, &system, &nl, &dw).unwrap())));
}

criterion_group!(benches, fbm, pathwise, solver_step);
criterion_main!(benches);
