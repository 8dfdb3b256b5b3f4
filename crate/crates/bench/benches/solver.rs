use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use elid_core::experiments::with_initial_params;
use elid_core::fixtures;
use elid_core::paths::routing_paths;
use elid_core::{
    evaluate, solve_exact, solve_heuristic, solve_oracle, Budget, ElidRoute, NodeId, Scheme,
};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_exact");
    group.sample_size(10);
    for (name, t) in [("sparse", fixtures::sparse()), ("dense", fixtures::dense())] {
        let t = with_initial_params(&t);
        for scheme in [
            Scheme::fixed(0.1).unwrap(),
            Scheme::decoupled(t.beta()).unwrap(),
            Scheme::combined(),
        ] {
            for workers in [1, 4] {
                let id = BenchmarkId::new(format!("{name}/{}", scheme.label()), workers);
                let budget = Budget {
                    workers,
                    ..Budget::default()
                };
                group.bench_with_input(id, &budget, |b, budget| {
                    b.iter(|| solve_exact(black_box(&t), &scheme, budget).unwrap())
                });
            }
        }
    }
    group.finish();
}

fn oracle_and_heuristic(c: &mut Criterion) {
    let t = with_initial_params(&fixtures::sparse());
    let scheme = Scheme::combined();
    c.bench_function("solve_oracle/sparse", |b| {
        b.iter(|| solve_oracle(black_box(&t), &scheme).unwrap())
    });
    let dense = with_initial_params(&fixtures::dense());
    c.bench_function("solve_heuristic/dense", |b| {
        b.iter(|| solve_heuristic(black_box(&dense), &scheme, 0).unwrap())
    });
}

fn evaluation(c: &mut Criterion) {
    let t = with_initial_params(&fixtures::dense());
    let a = solve_exact(&t, &Scheme::combined(), &Budget::default())
        .unwrap()
        .assignment;
    c.bench_function("evaluate/dense", |b| {
        b.iter(|| evaluate(black_box(&t), black_box(&a), &Scheme::combined()).unwrap())
    });
    c.bench_function("routing_paths/dense", |b| {
        b.iter(|| routing_paths(black_box(&t), NodeId(1), NodeId(10), None))
    });
    let route = a.route(NodeId(1)).unwrap();
    c.bench_function("route_from_paths", |b| {
        let up = route.uplink_path(NodeId(1)).unwrap();
        let down = route.downlink_path().unwrap();
        b.iter(|| ElidRoute::from_paths(black_box(&up), black_box(&down)))
    });
}

criterion_group!(benches, exact, oracle_and_heuristic, evaluation);
criterion_main!(benches);
