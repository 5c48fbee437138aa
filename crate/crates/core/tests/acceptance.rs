//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with the measured evidence. Run with `--nocapture` to see the
//! per-criterion lines.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use common::{harness_instance, oracle_instance, pass, random_tree_graph};
use flowsim::adversary::{
    capacity_adversary, certify_base_tour, reference_capacity_run, Lean,
};
use flowsim::bundling::{stream_bundles, SplitRule};
use flowsim::dispatch::{fifo_max_flow, run_tree_algorithm};
use flowsim::grouping::{binarize, make_groups};
use flowsim::instance::{validate, Request};
use flowsim::metric::{Anchor, Vertex, VertexSet};
use flowsim::oracle::optimal_max_flow;
use flowsim::rat::{rat, ratio};
use flowsim::sim::{run_online, DoublingWrapper, FifoBatchOnline, OnlineAlgorithm, TreeOnline};
use flowsim::speeding::{
    cvrp_window_bound, exact_cvrp, run_speeding, SpeedConfig, TourMode,
};
use flowsim::{Capacity, Instance};

// --- criterion 1: tree algorithm, single vehicle, flow at most 8F ---------

#[test]
fn criterion_01_tree_single_vehicle() {
    let started = Instant::now();
    let total = 200;
    for seed in 0..total {
        let (inst, _, f) = harness_instance(seed, 1);
        let out = run_tree_algorithm(&inst, f).expect("tree run succeeds");
        let recheck = validate(&out.instance, &out.schedule, rat(1)).expect("schedule valid");
        assert!(
            recheck.max_flow <= rat(8 * f),
            "seed {seed}: flow {} exceeds 8F = {}",
            recheck.max_flow,
            8 * f
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "criterion 1 exceeded its 10 s budget: {elapsed:?}"
    );
    pass(
        1,
        "tree k=1 flow <= 8F",
        &format!("{total} instances, 0 violations, {elapsed:.2?}"),
    );
}

// --- criterion 2: tree algorithm, k in 2..4, flow at most 24F --------------

#[test]
fn criterion_02_tree_multi_vehicle() {
    let started = Instant::now();
    let mut runs = 0;
    for k in [2usize, 3, 4] {
        for seed in 0..67 {
            let (inst, _, f) = harness_instance(seed, k);
            let out = run_tree_algorithm(&inst, f).expect("tree run succeeds");
            let recheck = validate(&out.instance, &out.schedule, rat(1)).expect("schedule valid");
            assert!(
                recheck.max_flow <= rat(24 * f),
                "seed {seed} k {k}: flow {} exceeds 24F = {}",
                recheck.max_flow,
                24 * f
            );
            runs += 1;
        }
    }
    pass(
        2,
        "tree k in 2..4 flow <= 24F",
        &format!("{runs} instances, 0 violations, {:.2?}", started.elapsed()),
    );
}

// --- criterion 3: backlog bounds over every odd window ---------------------

fn odd_window_check(values: &BTreeMap<i64, i64>, per_window: impl Fn(i64, i64) -> i64) -> bool {
    let Some((&lo, _)) = values.iter().next() else {
        return true;
    };
    let (&hi, _) = values.iter().next_back().unwrap();
    let mut a = lo;
    while a <= hi {
        let mut sum = 0;
        let mut b = a;
        while b <= hi {
            sum += values.get(&b).copied().unwrap_or(0);
            if sum > per_window(a, b) {
                return false;
            }
            b += 2;
        }
        a += 2;
    }
    true
}

#[test]
fn criterion_03_backlog_lemmas() {
    let mut single_windows = 0usize;
    for seed in 0..200 {
        let (inst, _, f) = harness_instance(seed, 1);
        let tree = inst.tree().unwrap();
        let bundles = stream_bundles(&tree, &inst, f, SplitRule::Single).unwrap();
        let values: BTreeMap<i64, i64> = bundles
            .iter()
            .map(|b| {
                let positions = inst.positions(&b.requests);
                (b.index, 2 * tree.mst(&positions).unwrap())
            })
            .collect();
        assert!(
            odd_window_check(&values, |a, b| (b - a + 4) * f),
            "seed {seed}: single-vehicle backlog window violated"
        );
        single_windows += values.len();
    }
    let mut multi_windows = 0usize;
    for k in [2usize, 3, 4] {
        for seed in 0..67 {
            let (inst, _, f) = harness_instance(seed, k);
            let tree = inst.tree().unwrap();
            let bin = binarize(&tree);
            let bundles = stream_bundles(
                &tree,
                &inst,
                f,
                SplitRule::Multi {
                    bin: &bin,
                    eps: (1, 1),
                },
            )
            .unwrap();
            let values: BTreeMap<i64, i64> = bundles
                .iter()
                .map(|b| {
                    let positions = inst.positions(&b.requests);
                    (b.index, tree.cost(&positions, 3 * f).unwrap())
                })
                .collect();
            assert!(
                odd_window_check(&values, |a, b| k as i64 * (b - a + 4) * f),
                "seed {seed} k {k}: cost backlog window violated"
            );
            multi_windows += values.len();
        }
    }
    pass(
        3,
        "backlog bounds on all odd windows",
        &format!("{single_windows} single-vehicle and {multi_windows} multi-vehicle bundles, exact arithmetic"),
    );
}

// --- criterion 4: grouping postconditions -----------------------------------

#[test]
fn criterion_04_grouping() {
    let mut groups_checked = 0usize;
    let mut cut_bundles = 0usize;
    // the harness instances plus a star-burst batch whose bundles exceed
    // the cutting threshold; (0, k) keys the harness, (1, _) the stars
    let mut cases: Vec<(u64, usize, bool)> = Vec::new();
    for k in [2usize, 3, 4] {
        for seed in 0..67 {
            cases.push((seed, k, false));
        }
    }
    for rotation in 0..20 {
        cases.push((rotation, 4, true));
    }
    {
        for (seed, k, star) in cases {
            let (inst, _, f) = if star {
                let triple = common::star_burst_instance(seed);
                // the packed schedule must also survive the full pipeline
                let out = run_tree_algorithm(&triple.0, triple.2).expect("tree run succeeds");
                assert!(
                    out.report.max_flow <= rat(24 * triple.2),
                    "star {seed}: flow {} exceeds 24F",
                    out.report.max_flow
                );
                triple
            } else {
                harness_instance(seed, k)
            };
            let tree = inst.tree().unwrap();
            let bin = binarize(&tree);
            let bundles = stream_bundles(
                &tree,
                &inst,
                f,
                SplitRule::Multi {
                    bin: &bin,
                    eps: (1, 1),
                },
            )
            .unwrap();
            for bundle in &bundles {
                let pairs: Vec<(usize, Vertex)> = bundle
                    .requests
                    .iter()
                    .map(|&r| (r, inst.requests[r].vertex))
                    .collect();
                let groups = make_groups(&bin, &pairs, f);
                // partition
                let mut all: Vec<usize> =
                    groups.iter().flat_map(|g| g.requests.clone()).collect();
                all.sort_unstable();
                assert_eq!(all, bundle.requests, "groups must partition the bundle");
                // weight cap and cost domination
                let mut twice_total = 0;
                for g in &groups {
                    assert!(g.mst <= 8 * f, "group weight {} exceeds 8F", g.mst);
                    twice_total += 2 * g.mst;
                }
                let positions = inst.positions(&bundle.requests);
                let cost3f = tree.cost(&positions, 3 * f).unwrap();
                assert!(
                    twice_total <= cost3f,
                    "2*sum of group weights {twice_total} exceeds cost_3F {cost3f}"
                );
                // per-edge usage never exceeds the ceiling count
                let counts = to_map(tree.cost_terms(&positions, 3 * f).unwrap());
                let mut used: BTreeMap<Vertex, i64> = BTreeMap::new();
                for g in &groups {
                    let gp = inst.positions(&g.requests);
                    for (child, _) in tree.anchored_weights(&gp).unwrap() {
                        *used.entry(child).or_insert(0) += 1;
                    }
                }
                for (&e, &u) in &used {
                    assert!(
                        u <= counts.get(&e).copied().unwrap_or(0),
                        "edge {e} used by {u} groups, ceiling is {:?}",
                        counts.get(&e)
                    );
                }
                groups_checked += groups.len();
                if groups.len() > 1 {
                    cut_bundles += 1;
                }
            }
        }
    }
    assert!(
        cut_bundles > 0,
        "coverage: at least one bundle must actually be cut"
    );
    pass(
        4,
        "group weight cap and cost domination",
        &format!("{groups_checked} groups checked ({cut_bundles} bundles cut into several), exact"),
    );
}

// --- criterion 5: FIFO flow bound on constructed job streams ----------------

#[test]
fn criterion_05_fifo_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for round in 0..1000 {
        let k = rng.gen_range(1..=4usize);
        let d = rng.gen_range(0..=60i64);
        let p_cap = rng.gen_range(1..=20i64);
        let mut jobs: Vec<(i64, i64)> = Vec::new();
        let mut t = 0i64;
        let mut excess = 0i64; // max window excess ending at the last batch
        for _ in 0..rng.gen_range(1..=12) {
            let gap = rng.gen_range(0..=6i64);
            t += gap;
            let slack = d - (excess - k as i64 * gap).max(0);
            if slack <= 0 {
                continue;
            }
            let mut batch = rng.gen_range(0..=slack);
            let mut sigma = 0;
            while batch > 0 {
                let size = batch.min(rng.gen_range(1..=p_cap));
                jobs.push((t, size));
                sigma += size;
                batch -= size;
            }
            excess = sigma.max(excess - k as i64 * gap + sigma);
        }
        if jobs.is_empty() {
            continue;
        }
        // independent check of the release-rate condition
        let times: Vec<i64> = jobs.iter().map(|&(r, _)| r).collect();
        for (i, &a) in times.iter().enumerate() {
            for &b in &times[i..] {
                let total: i64 = jobs
                    .iter()
                    .filter(|&&(r, _)| r >= a && r <= b)
                    .map(|&(_, s)| s)
                    .sum();
                assert!(
                    total <= k as i64 * (b - a) + d,
                    "round {round}: stream generator violated the rate condition"
                );
            }
        }
        let p_max = jobs.iter().map(|&(_, s)| s).max().unwrap();
        let flow = fifo_max_flow(&jobs, k);
        // flow <= D/k + 2(k-1)P/k, cross-multiplied to stay integral
        assert!(
            k as i64 * flow <= d + 2 * (k as i64 - 1) * p_max,
            "round {round}: k={k} flow {flow} exceeds (D + 2(k-1)P)/k with D={d} P={p_max}"
        );
    }
    pass(
        5,
        "FIFO flow bound on rate-limited streams",
        "1000 constructed streams, exact integer comparison",
    );
}

// --- criterion 6: competitiveness against the exact oracle ------------------

#[test]
fn criterion_06_oracle_competitiveness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for round in 0..100 {
        let inst = oracle_instance(&mut rng, 6, 1, Capacity::Unbounded);
        let opt = optimal_max_flow(&inst, 6).expect("oracle fits");
        let out = run_tree_algorithm(&inst, opt.max_flow).expect("tree run succeeds");
        assert!(
            out.report.max_flow <= rat(8 * opt.max_flow),
            "round {round}: flow {} exceeds 8·F* = {}",
            out.report.max_flow,
            8 * opt.max_flow
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 6 exceeded its 60 s budget: {elapsed:?}"
    );
    pass(
        6,
        "tree k=1 within 8x the exact optimum",
        &format!("100 oracle-sized instances, {elapsed:.2?}"),
    );
}

// --- criterion 7: speeding with exact tours ---------------------------------

#[test]
fn criterion_07_speeding_exact_mode() {
    let mut runs = 0;
    for eps in [ratio(1, 2), ratio(1, 4)] {
        let cfg = SpeedConfig::new(TourMode::Exact, eps).unwrap();
        let mut seed = 0u64;
        let mut kept = 0;
        while kept < 20 {
            seed += 1;
            assert!(seed < 500, "could not find enough small instances");
            let params = flowsim::instance::GenParams {
                tree_size: 6,
                vehicles: 3,
                capacity: Capacity::Finite(2),
                horizon: 8,
                f_target: 10,
                max_edge_len: 2,
                max_idle: 10,
            };
            let Ok((inst, _)) = flowsim::instance::generate_feasible(seed, &params) else {
                continue;
            };
            if inst.requests.is_empty() || inst.requests.len() > 12 {
                continue;
            }
            kept += 1;
            runs += 1;
            let f = params.f_target;
            let out = run_speeding(&inst, f, cfg).expect("no invariant may fire");
            let bound = cfg.gamma * rat(2 * f);
            assert!(
                out.report.max_flow <= bound,
                "seed {seed}: flow {} exceeds 2γF",
                out.report.max_flow
            );
        }
    }
    pass(
        7,
        "speeding exact mode within 2γF, free vehicle never missing",
        &format!("{runs} runs over eps in {{1/2, 1/4}}, exact"),
    );
}

// --- criterion 8: windowed CVRP length bound ---------------------------------

#[test]
fn criterion_08_cvrp_window_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut windows = 0usize;
    for _ in 0..40 {
        let capacity = if rng.gen_bool(0.5) {
            Capacity::Finite(rng.gen_range(1..=3))
        } else {
            Capacity::Unbounded
        };
        let k = rng.gen_range(1..=3usize);
        let inst = oracle_instance(&mut rng, 6, k, capacity);
        let Ok(opt) = optimal_max_flow(&inst, 6) else {
            continue;
        };
        let f = opt.max_flow.max(1);
        let mut times: Vec<i64> = inst.requests.iter().map(|r| r.arrival).collect();
        times.sort_unstable();
        times.dedup();
        for (i, &a) in times.iter().enumerate() {
            for &b in &times[i..] {
                let window: Vec<(usize, Request)> = inst
                    .requests
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|(_, r)| r.arrival >= a && r.arrival <= b)
                    .collect();
                let tour = exact_cvrp(&inst.graph, &window, inst.capacity);
                let bound = cvrp_window_bound(&inst, a, b, f);
                assert!(
                    tour.length <= bound,
                    "window [{a},{b}]: exact CVRP {} exceeds bound {bound}",
                    tour.length
                );
                windows += 1;
            }
        }
    }
    // contrapositive probe: an invalid (too small) F lets the bound break
    let graph = flowsim::MetricGraph::new(
        vec![0, 1, 2, 3],
        vec![
            flowsim::EdgeSpec::new(0, 1, 5),
            flowsim::EdgeSpec::new(0, 2, 5),
            flowsim::EdgeSpec::new(0, 3, 5),
        ],
        0,
    )
    .unwrap();
    let inst = Instance::new(
        graph,
        1,
        Capacity::Unbounded,
        vec![
            Request { arrival: 0, vertex: 1 },
            Request { arrival: 0, vertex: 2 },
            Request { arrival: 0, vertex: 3 },
        ],
    )
    .unwrap();
    let window: Vec<(usize, Request)> = inst.requests.iter().copied().enumerate().collect();
    let tour = exact_cvrp(&inst.graph, &window, inst.capacity);
    let too_small_f = 5;
    assert!(
        tour.length > cvrp_window_bound(&inst, 0, 0, too_small_f),
        "probe: an invalid F should break the bound"
    );
    pass(
        8,
        "exact CVRP within k(b-a+2F) per window",
        &format!("{windows} windows checked, plus the invalid-F probe"),
    );
}

// --- criterion 9: base gadget tour certificates ------------------------------

#[test]
fn criterion_09_base_gadget_certificates() {
    for p in 2..=6i64 {
        for lean in [Lean::Left, Lean::Right] {
            let cert = certify_base_tour(p, lean).expect("certificate holds");
            assert_eq!(cert.half_units, 7 * (2 * p + 1));
            assert_eq!(cert.length, cert.counting_bound);
        }
    }
    pass(
        9,
        "canonical gadget tours match the counting bound",
        "p in 2..=6, both leans, length 7(2p+1) exactly",
    );
}

// --- criterion 10: capacity-2 adaptive adversary ------------------------------

#[test]
fn criterion_10_capacity_adversary() {
    let mut details = Vec::new();
    for p in 4..=8i64 {
        let (skeleton, mut adv) = capacity_adversary(p).unwrap();
        let mut baseline = FifoBatchOnline::new(&skeleton);
        let out = run_online(&skeleton, &mut baseline, rat(1), Some(&mut adv))
            .expect("baseline run completes");
        assert!(
            out.report.max_flow >= rat(p),
            "p={p}: baseline flow {} below p",
            out.report.max_flow
        );
        // reference responder on the realized choice vector stays within 16
        let choices: Vec<Vertex> = adv
            .choices()
            .into_iter()
            .map(|c| c.unwrap_or(2))
            .collect();
        let (ref_inst, ref_sch) = reference_capacity_run(p, &choices).unwrap();
        let report = validate(&ref_inst, &ref_sch, rat(1)).expect("reference schedule valid");
        assert!(
            report.max_flow <= rat(16),
            "p={p}: reference flow {} above 16",
            report.max_flow
        );
        details.push(format!("p={p}: baseline {}", out.report.max_flow));
    }
    pass(
        10,
        "adaptive adversary: baseline >= p, responder <= 16",
        &details.join(", "),
    );
}

// --- criterion 11: guess-doubling wrapper -------------------------------------

#[test]
fn criterion_11_doubling_wrapper() {
    let beta = 8i64;
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for round in 0..30 {
        let inst = oracle_instance(&mut rng, 5, 1, Capacity::Unbounded);
        let opt = optimal_max_flow(&inst, 6).expect("oracle fits");
        let factory_inst = inst.clone();
        let mut wrapper = DoublingWrapper::new(inst.graph.clone(), beta, move |f| {
            Box::new(TreeOnline::new(&factory_inst, f).unwrap()) as Box<dyn OnlineAlgorithm>
        });
        let out = run_online(&inst, &mut wrapper, rat(1), None).expect("wrapped run completes");
        assert!(
            out.report.max_flow <= rat(64 * opt.max_flow),
            "round {round}: flow {} exceeds 64·F*",
            out.report.max_flow
        );
        assert!(
            wrapper.state().f <= 2 * opt.max_flow,
            "round {round}: final guess {} exceeds 2·F* = {}",
            wrapper.state().f,
            2 * opt.max_flow
        );
    }
    pass(
        11,
        "doubling: flow <= 64 F*, final guess <= 2 F*",
        "30 oracle-sized instances, exact",
    );
}

// --- criterion 12: metric inequality property suites ---------------------------

fn to_map(terms: Vec<(Vertex, i64)>) -> BTreeMap<Vertex, i64> {
    terms.into_iter().collect()
}

#[test]
fn criterion_12_metric_inequalities() {
    let samples = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    for round in 0..samples {
        let n = rng.gen_range(2..=10u32);
        let graph = random_tree_graph(&mut rng, n, 6);
        let tree = flowsim::RootedTree::from_graph(graph).unwrap();
        let mut set = |density: f64| -> VertexSet {
            tree.vertex_ids()
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(density))
                .collect()
        };
        let x1 = set(0.4);
        let x2 = set(0.4);
        let x3 = set(0.4);
        let x4 = set(0.4);
        let anchor = {
            let ids = tree.vertex_ids();
            let v = ids[rng.gen_range(0..ids.len())];
            if v != tree.depot() && rng.gen_bool(0.5) {
                Anchor::Edge(tree.parent_of(v).unwrap().unwrap(), v)
            } else {
                Anchor::Vertex(v)
            }
        };
        let f = rng.gen_range(1..=9i64);
        let union = |a: &VertexSet, b: &VertexSet| -> VertexSet {
            a.union(b).copied().collect()
        };
        let m = |x: &VertexSet| tree.mst_anchored(anchor, x).unwrap();
        let x12 = union(&x1, &x2);
        let x23 = union(&x2, &x3);
        let x34 = union(&x3, &x4);
        let x123 = union(&x12, &x3);
        let x234 = union(&x23, &x4);
        // subadditivity
        assert!(m(&x12) <= m(&x1) + m(&x2), "round {round}: eq1");
        // exchange inequalities
        assert!(
            m(&x2) + m(&x123) <= m(&x12) + m(&x23),
            "round {round}: eq2"
        );
        assert!(
            m(&x123) + m(&x234) <= m(&x12) + m(&x23) + m(&x34),
            "round {round}: eq3"
        );
        // monotonicity
        assert!(m(&x1) <= m(&x12), "round {round}: monotonicity");
        // cost inequalities, whole-tree and per-edge
        let cost = |x: &VertexSet| tree.cost(x, f).unwrap();
        let ccost = |x: &VertexSet, cond: &VertexSet| tree.conditional_cost(x, cond, f).unwrap();
        assert!(
            ccost(&x12, &x3) <= cost(&x1) + ccost(&x2, &x3),
            "round {round}: eq5"
        );
        assert!(
            cost(&x23) + ccost(&x1, &x23) + ccost(&x4, &x23) <= cost(&x12) + cost(&x34),
            "round {round}: eq6"
        );
        let terms = |x: &VertexSet| to_map(tree.cost_terms(x, f).unwrap());
        let cterms =
            |x: &VertexSet, c: &VertexSet| to_map(tree.conditional_cost_terms(x, c, f).unwrap());
        let lhs7 = cterms(&x12, &x3);
        let c1 = terms(&x1);
        let c2c3 = cterms(&x2, &x3);
        for (&e, &v) in &lhs7 {
            assert!(
                v <= c1.get(&e).copied().unwrap_or(0) + c2c3.get(&e).copied().unwrap_or(0),
                "round {round}: eq7 at edge {e}"
            );
        }
        let l8a = terms(&x23);
        let l8b = cterms(&x1, &x23);
        let l8c = cterms(&x4, &x23);
        let r8a = terms(&x12);
        let r8b = terms(&x34);
        let edges: VertexSet = l8a
            .keys()
            .chain(l8b.keys())
            .chain(l8c.keys())
            .copied()
            .collect();
        for &e in &edges {
            let lhs = l8a.get(&e).copied().unwrap_or(0)
                + l8b.get(&e).copied().unwrap_or(0)
                + l8c.get(&e).copied().unwrap_or(0);
            let rhs = r8a.get(&e).copied().unwrap_or(0) + r8b.get(&e).copied().unwrap_or(0);
            assert!(lhs <= rhs, "round {round}: eq8 at edge {e}");
        }
    }
    // per-edge bundle inequality on emitted bundles, sampled until the same
    // count of (bundle, edge) checks is reached
    let mut checks = 0usize;
    let mut seed = 0u64;
    while checks < samples {
        seed += 1;
        let (inst, _, f) = harness_instance(seed % 40, 2);
        let tree = inst.tree().unwrap();
        let bin = binarize(&tree);
        let bundles = stream_bundles(
            &tree,
            &inst,
            f,
            SplitRule::Multi {
                bin: &bin,
                eps: (1, 1),
            },
        )
        .unwrap();
        for b in &bundles {
            let core = inst.positions(&b.core);
            let prev_right = inst.positions(&b.prev_right);
            let next_left = inst.positions(&b.next_left);
            let all = inst.positions(&b.requests);
            let lhs_core = to_map(tree.cost_terms(&core, f).unwrap());
            let lhs_prev = to_map(tree.conditional_cost_terms(&prev_right, &core, f).unwrap());
            let lhs_next = to_map(tree.conditional_cost_terms(&next_left, &core, f).unwrap());
            let rhs = to_map(tree.cost_terms(&all, 3 * f).unwrap());
            for (&e, &need) in &rhs {
                let have = lhs_core.get(&e).copied().unwrap_or(0)
                    + lhs_prev.get(&e).copied().unwrap_or(0)
                    + lhs_next.get(&e).copied().unwrap_or(0);
                assert!(
                    have >= need,
                    "seed {seed} bundle {}: eq10 at edge {e}: {have} < {need}",
                    b.index
                );
                checks += 1;
            }
        }
    }
    pass(
        12,
        "metric inequality suites",
        &format!("{samples} samples per inequality family, exact, zero failures"),
    );
}
