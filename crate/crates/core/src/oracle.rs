//! Exact offline optimum for tiny instances, optimum-induced analysis
//! partitions, and certified lower bounds.
//!
//! The oracle enumerates schedules as partitions of the requests into trips
//! with per-trip service orders and vehicle assignments, in canonical
//! (start, vehicle) order, starting every trip as early as its served
//! arrivals and its vehicle allow — delaying a trip never improves the
//! maximum flow, so earliest-start enumeration is exact. Branch-and-bound on
//! the incumbent keeps instances up to the request limit tractable.

use std::collections::BTreeMap;

use crate::bundling::IntervalBuckets;
use crate::instance::{validate, Instance, ReqId, Schedule, Trip, ValidationError};
use crate::metric::{Length, MetricError, MetricGraph, RootedTree, Vertex, VertexSet};
use crate::rat::rat;

#[derive(Debug, Clone)]
pub struct OptResult {
    pub max_flow: i64,
    pub witness: Schedule,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("instance has {got} requests, oracle limit is {limit}")]
    TooManyRequests { got: usize, limit: usize },
    #[error("witness schedule has maximum flow above {0}")]
    WitnessExceedsF(i64),
    #[error("a witness trip serves arrivals more than {f} apart ({lo} and {hi})")]
    TripSpansTooFar { lo: i64, hi: i64, f: i64 },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub const DEFAULT_ORACLE_LIMIT: usize = 6;

/// Exhaustive minimum of the maximum flow time, with one witness schedule.
pub fn optimal_max_flow(inst: &Instance, limit: usize) -> Result<OptResult, OracleError> {
    let m = inst.requests.len();
    if m > limit {
        return Err(OracleError::TooManyRequests { got: m, limit });
    }
    if m == 0 {
        return Ok(OptResult {
            max_flow: 0,
            witness: Schedule::empty(inst.vehicles),
        });
    }
    let mut search = Search {
        inst,
        best: i64::MAX,
        best_trips: Vec::new(),
        trips: Vec::new(),
        cap: match inst.capacity {
            crate::instance::Capacity::Finite(c) => (c as usize).min(m),
            crate::instance::Capacity::Unbounded => m,
        },
    };
    let full = (1u32 << m) - 1;
    let mut free = vec![0i64; inst.vehicles];
    search.explore(full, &mut free, 0, (i64::MIN, 0));
    debug_assert!(search.best < i64::MAX);
    let mut witness = Schedule::empty(inst.vehicles);
    let mut best_trips = search.best_trips.clone();
    best_trips.sort_by_key(|t| (t.0, t.1.start));
    for (vehicle, trip) in best_trips {
        witness.vehicles[vehicle].push(trip);
    }
    let report = validate(inst, &witness, rat(1))?;
    debug_assert_eq!(report.max_flow, rat(search.best));
    Ok(OptResult {
        max_flow: search.best,
        witness,
    })
}

struct Search<'a> {
    inst: &'a Instance,
    best: i64,
    best_trips: Vec<(usize, Trip)>,
    trips: Vec<(usize, Trip)>,
    cap: usize,
}

impl Search<'_> {
    fn explore(
        &mut self,
        remaining: u32,
        free: &mut Vec<i64>,
        flow_so_far: i64,
        last_key: (i64, usize),
    ) {
        if flow_so_far >= self.best {
            return;
        }
        if remaining == 0 {
            self.best = flow_so_far;
            self.best_trips = self.trips.clone();
            return;
        }
        let g = &self.inst.graph;
        let depot = g.depot();
        // remaining requests can never beat this flow
        let min_free = free.iter().copied().min().expect("k >= 1");
        let mut lower = flow_so_far;
        for j in 0..self.inst.requests.len() {
            if remaining & (1 << j) != 0 {
                let r = &self.inst.requests[j];
                let d = g.distance(depot, r.vertex).expect("request vertex");
                lower = lower.max(min_free.max(r.arrival) + d - r.arrival);
            }
        }
        if lower >= self.best {
            return;
        }
        // enumerate the next trip: subset, service order, vehicle, in
        // canonical (start, vehicle) order
        let members: Vec<usize> = (0..self.inst.requests.len())
            .filter(|&j| remaining & (1 << j) != 0)
            .collect();
        let subsets = nonempty_subsets(&members, self.cap);
        for subset in subsets {
            let max_arrival = subset
                .iter()
                .map(|&j| self.inst.requests[j].arrival)
                .max()
                .expect("nonempty");
            let mut verts: Vec<Vertex> =
                subset.iter().map(|&j| self.inst.requests[j].vertex).collect();
            verts.sort_unstable();
            verts.dedup();
            let orders = permutations(&verts);
            for vehicle in 0..free.len() {
                // identical vehicles: trying the first of each free-time
                // class is enough
                if free[..vehicle].contains(&free[vehicle]) {
                    continue;
                }
                let start = free[vehicle].max(max_arrival);
                if (start, vehicle) < last_key {
                    continue;
                }
                for order in &orders {
                    let mut stops = vec![depot];
                    stops.extend_from_slice(order);
                    stops.push(depot);
                    let walk = g.expand_walk(&stops).expect("vertices in graph");
                    if walk[1..walk.len() - 1].contains(&depot) {
                        // a service order crossing the depot splits into
                        // smaller trips, which are enumerated separately
                        continue;
                    }
                    let len = g.walk_len(&walk).expect("expanded walk");
                    // per-request serve times at the first visit
                    let mut flow = flow_so_far;
                    let mut reach = BTreeMap::new();
                    let mut at = 0i64;
                    for w in walk.windows(2) {
                        at += g.edge_len(w[0], w[1]).expect("walk edge");
                        reach.entry(w[1]).or_insert(at);
                    }
                    for &j in &subset {
                        let r = &self.inst.requests[j];
                        let serve = start + reach[&r.vertex];
                        flow = flow.max(serve - r.arrival);
                    }
                    if flow >= self.best {
                        continue;
                    }
                    let trip = Trip {
                        start: rat(start),
                        walk: walk.clone(),
                        served: subset.clone(),
                    };
                    self.trips.push((vehicle, trip));
                    let saved = free[vehicle];
                    free[vehicle] = start + len;
                    let mut mask = remaining;
                    for &j in &subset {
                        mask &= !(1 << j);
                    }
                    self.explore(mask, free, flow, (start, vehicle));
                    free[vehicle] = saved;
                    self.trips.pop();
                }
            }
        }
    }
}

fn nonempty_subsets(members: &[usize], cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = members.len();
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) <= cap {
            out.push(
                (0..n)
                    .filter(|&b| mask & (1 << b) != 0)
                    .map(|b| members[b])
                    .collect(),
            );
        }
    }
    out
}

fn permutations(items: &[Vertex]) -> Vec<Vec<Vertex>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// The interval partition induced by a witness schedule with maximum flow at
/// most `F`: every trip's served set joins the set of the earliest interval
/// it touches. Trips may touch at most two adjacent intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptPartition {
    pub sets: BTreeMap<i64, Vec<ReqId>>,
}

pub fn opt_partition(
    inst: &Instance,
    witness: &Schedule,
    f: Length,
) -> Result<OptPartition, OracleError> {
    let report = validate(inst, witness, rat(1))?;
    if report.max_flow > rat(f) {
        return Err(OracleError::WitnessExceedsF(f));
    }
    let mut sets: BTreeMap<i64, Vec<ReqId>> = BTreeMap::new();
    for (_, trip) in witness.trips() {
        if trip.served.is_empty() {
            continue;
        }
        let arrivals: Vec<i64> = trip
            .served
            .iter()
            .map(|&r| inst.requests[r].arrival)
            .collect();
        let lo = *arrivals.iter().min().expect("nonempty");
        let hi = *arrivals.iter().max().expect("nonempty");
        if hi - lo > f {
            return Err(OracleError::TripSpansTooFar { lo, hi, f });
        }
        let bucket = IntervalBuckets::bucket_index(lo, f);
        sets.entry(bucket).or_default().extend(&trip.served);
    }
    for reqs in sets.values_mut() {
        reqs.sort_unstable();
    }
    Ok(OptPartition { sets })
}

/// Per-edge ceiling counts `c(R', e) = ceil(mst_e(R')/F)`: any schedule with
/// maximum flow at most `F` serving `R'` must use edge `e` in at least that
/// many trips.
pub fn trip_count_lower_bound(
    tree: &RootedTree,
    positions: &VertexSet,
    f: Length,
) -> Result<Vec<(Vertex, i64)>, MetricError> {
    tree.cost_terms(positions, f)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CountingError {
    #[error("vertices {u} and {v} are at distance 0, no positive spacing exists")]
    ZeroSpacing { u: Vertex, v: Vertex },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Distance-counting TSP lower bound: if all pairwise non-depot distances
/// within `vp` are at least `δ` and every member is at least `δ/2` from the
/// depot, any closed tour visiting `vp` has length at least `δ·|vp \ {o}|`.
/// `δ` is taken as large as the hypotheses allow; a zero-distance pair is a
/// refusal.
pub fn counting_tsp_lower_bound(g: &MetricGraph, vp: &VertexSet) -> Result<Length, CountingError> {
    let depot = g.depot();
    let members: Vec<Vertex> = vp.iter().copied().filter(|&v| v != depot).collect();
    if members.is_empty() {
        return Ok(0);
    }
    let mut delta = Length::MAX;
    let mut witness_pair = (depot, depot);
    for &v in &members {
        let d = g.distance(depot, v)?;
        if 2 * d < delta {
            delta = 2 * d;
            witness_pair = (depot, v);
        }
    }
    for (i, &u) in members.iter().enumerate() {
        for &v in &members[i + 1..] {
            let d = g.distance(u, v)?;
            if d < delta {
                delta = d;
                witness_pair = (u, v);
            }
        }
    }
    if delta == 0 {
        return Err(CountingError::ZeroSpacing {
            u: witness_pair.0,
            v: witness_pair.1,
        });
    }
    Ok(delta * members.len() as Length)
}

/// Total length of a closed stop walk from the depot, used when certifying
/// canonical tours against `counting_tsp_lower_bound`.
pub fn closed_walk_length(g: &MetricGraph, stops: &[Vertex]) -> Result<Length, MetricError> {
    let depot = g.depot();
    let mut at = depot;
    let mut total = 0;
    for &v in stops {
        total += g.distance(at, v)?;
        at = v;
    }
    total += g.distance(at, depot)?;
    Ok(total)
}
