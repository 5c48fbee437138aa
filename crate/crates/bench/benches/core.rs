//! Criterion benchmarks for the core algorithms at desk scale.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use flowsim::bundling::{split_multi, stream_bundles, SplitRule};
use flowsim::dispatch::run_tree_algorithm;
use flowsim::grouping::binarize;
use flowsim::instance::{generate_feasible, GenParams, Request};
use flowsim::metric::{MetricGraph, RootedTree, VertexSet};
use flowsim::oracle::optimal_max_flow;
use flowsim::speeding::{exact_cvrp, tsp_approx};
use flowsim::{Capacity, EdgeSpec, Instance};

fn random_tree(rng: &mut ChaCha8Rng, n: u32, max_len: i64) -> RootedTree {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push(EdgeSpec::new(
            rng.gen_range(0..v),
            v,
            rng.gen_range(1..=max_len),
        ));
    }
    let g = MetricGraph::new((0..n).collect(), edges, 0).unwrap();
    RootedTree::from_graph(g).unwrap()
}

fn harness(seed: u64, k: usize) -> (Instance, i64) {
    let params = GenParams {
        tree_size: 32,
        vehicles: k,
        capacity: Capacity::Unbounded,
        horizon: 40,
        f_target: 12,
        max_edge_len: 3,
        max_idle: 12,
    };
    let (inst, _) = generate_feasible(seed, &params).unwrap();
    (inst, params.f_target)
}

fn bench_metric(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tree = random_tree(&mut rng, 64, 5);
    let x: VertexSet = (1..64).filter(|_| rng.gen_bool(0.3)).collect();
    let xp: VertexSet = (1..64).filter(|_| rng.gen_bool(0.2)).collect();
    c.bench_function("metric/cost_terms 64v", |b| {
        b.iter(|| tree.cost(&x, 7).unwrap())
    });
    c.bench_function("metric/conditional_cost 64v", |b| {
        b.iter(|| tree.conditional_cost(&x, &xp, 7).unwrap())
    });
}

fn bench_split(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tree = random_tree(&mut rng, 24, 3);
    let bin = binarize(&tree);
    let reqs: Vec<Request> = (0..18)
        .map(|_| Request {
            arrival: 0,
            vertex: rng.gen_range(1..24),
        })
        .collect();
    let inst = Instance::new(tree.graph().clone(), 2, Capacity::Unbounded, reqs).unwrap();
    let ids: Vec<usize> = (0..18).collect();
    let (prev, rest) = ids.split_at(6);
    let (cur, next) = rest.split_at(6);
    c.bench_function("bundling/split_multi 6-request bucket", |b| {
        b.iter(|| split_multi(&bin, &inst, prev, cur, next, 9, (1, 1)).unwrap())
    });
}

fn bench_tree_algorithm(c: &mut Criterion) {
    let (inst1, f1) = harness(7, 1);
    c.bench_function("dispatch/tree end-to-end k=1", |b| {
        b.iter(|| run_tree_algorithm(&inst1, f1).unwrap())
    });
    let (inst4, f4) = harness(7, 4);
    c.bench_function("dispatch/tree end-to-end k=4", |b| {
        b.iter(|| run_tree_algorithm(&inst4, f4).unwrap())
    });
    let tree = inst4.tree().unwrap();
    let bin = binarize(&tree);
    c.bench_function("bundling/stream multi k=4", |b| {
        b.iter(|| {
            stream_bundles(
                &tree,
                &inst4,
                f4,
                SplitRule::Multi {
                    bin: &bin,
                    eps: (1, 1),
                },
            )
            .unwrap()
        })
    });
}

fn bench_tours(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_tree(&mut rng, 40, 4);
    let reqs: Vec<(usize, Request)> = (0..24)
        .map(|i| {
            (
                i,
                Request {
                    arrival: 0,
                    vertex: rng.gen_range(1..40),
                },
            )
        })
        .collect();
    c.bench_function("speeding/tsp_approx 24 requests", |b| {
        b.iter(|| tsp_approx(tree.graph(), &reqs))
    });
    let small: Vec<(usize, Request)> = reqs[..10].to_vec();
    c.bench_function("speeding/exact_cvrp 10 requests c=3", |b| {
        b.iter(|| exact_cvrp(tree.graph(), &small, Capacity::Finite(3)))
    });
}

fn bench_oracle(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tree = random_tree(&mut rng, 5, 3);
    let reqs: Vec<Request> = (0..6)
        .map(|_| Request {
            arrival: rng.gen_range(0..10),
            vertex: rng.gen_range(1..5),
        })
        .collect();
    let inst = Instance::new(tree.graph().clone(), 2, Capacity::Unbounded, reqs).unwrap();
    c.bench_function("oracle/optimal_max_flow 6 requests", |b| {
        b.iter_batched(
            || inst.clone(),
            |inst| optimal_max_flow(&inst, 6).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_metric,
    bench_split,
    bench_tree_algorithm,
    bench_tours,
    bench_oracle
);
criterion_main!(benches);
