//! Windowed batching for general metrics under speed augmentation, plus the
//! tour builders it needs: MST-doubling TSP, iterated tour partitioning for
//! capacitated runs, and exact Held-Karp / partition solvers for tiny
//! batches.
//!
//! The driver waits for windows of length `γF` with `γ = (2α+2)/ε`, builds
//! an `α`-approximate capacity-respecting tour over each window's batch,
//! cuts it greedily into subtours of bounded length, and starts them all at
//! the window boundary on free vehicles running at speed `α+ε`. Every
//! batched request is then served within one further window, giving maximum
//! flow `2γF` when `F` really bounds the unit-speed optimum.

use std::collections::HashMap;

use crate::instance::{Capacity, Instance, ReqId, Request, Trip};
use crate::metric::{Length, MetricError, MetricGraph, Vertex};
use crate::rat::{rat, Rat};
use crate::sim::{ActCtx, AlgError, OnlineAlgorithm, RunOutcome, SimError, StartTrip};

/// Largest batch the exact mode will solve before refusing.
pub const EXACT_BATCH_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TourMode {
    /// Optimal tours via Held-Karp / exact partition; exponential time,
    /// refuses batches above `EXACT_BATCH_LIMIT`.
    Exact,
    /// MST-doubling, ratio 2; uncapacitated only.
    Tsp2,
    /// Iterated tour partitioning over MST-doubling, ratio 3 with unit
    /// demands.
    Cvrp,
}

impl TourMode {
    pub fn alpha(self) -> i64 {
        match self {
            TourMode::Exact => 1,
            TourMode::Tsp2 => 2,
            TourMode::Cvrp => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedConfig {
    pub mode: TourMode,
    pub eps: Rat,
    pub alpha: i64,
    /// Window length multiplier `γ = (2α+2)/ε`.
    pub gamma: Rat,
    /// Vehicle speed `α + ε`.
    pub speed: Rat,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpeedingError {
    #[error("eps must lie strictly between 0 and 1, got {0}")]
    BadEps(String),
    #[error("tsp2 mode requires unbounded capacity")]
    ModeNeedsUnbounded,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Sim(Box<SimError>),
}

impl From<SimError> for SpeedingError {
    fn from(e: SimError) -> Self {
        SpeedingError::Sim(Box::new(e))
    }
}

impl SpeedConfig {
    pub fn new(mode: TourMode, eps: Rat) -> Result<Self, SpeedingError> {
        if eps <= rat(0) || eps >= rat(1) {
            return Err(SpeedingError::BadEps(crate::rat::fmt_rat(eps)));
        }
        let alpha = mode.alpha();
        Ok(SpeedConfig {
            mode,
            eps,
            alpha,
            gamma: rat(2 * alpha + 2) / eps,
            speed: rat(alpha) + eps,
        })
    }
}

// ---------------------------------------------------------------------------
// Tours
// ---------------------------------------------------------------------------

/// One stop of a tour: a vertex and the requests delivered there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stop {
    pub vertex: Vertex,
    pub served: Vec<ReqId>,
}

/// A depot-anchored tour. The depot at both ends is implicit; interior depot
/// visits (capacity-segment boundaries) appear as explicit stops with empty
/// served sets. Between consecutive depot visits at most `c` requests are
/// carried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvrpTour {
    pub stops: Vec<Stop>,
    pub length: Length,
}

fn tour_length(g: &MetricGraph, stops: &[Stop]) -> Length {
    let depot = g.depot();
    let mut at = depot;
    let mut total = 0;
    for s in stops {
        total += g.distance(at, s.vertex).expect("tour vertex");
        at = s.vertex;
    }
    total + g.distance(at, depot).expect("tour vertex")
}

/// Deterministic Prim MST over the metric closure of `verts ∪ {depot}`.
/// Returns (parent vertex, child vertex) pairs.
fn metric_mst(g: &MetricGraph, verts: &[Vertex]) -> Vec<(Vertex, Vertex)> {
    let mut nodes = vec![g.depot()];
    nodes.extend_from_slice(verts);
    let n = nodes.len();
    let mut in_tree = vec![false; n];
    let mut key = vec![Length::MAX; n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for i in 1..n {
        key[i] = g.distance(nodes[0], nodes[i]).expect("mst vertex");
    }
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let next = (1..n)
            .filter(|&i| !in_tree[i])
            .min_by_key(|&i| (key[i], nodes[i]))
            .expect("nodes remain");
        in_tree[next] = true;
        edges.push((nodes[parent[next]], nodes[next]));
        for i in 1..n {
            if !in_tree[i] {
                let d = g.distance(nodes[next], nodes[i]).expect("mst vertex");
                if d < key[i] || (d == key[i] && nodes[next] < nodes[parent[i]]) {
                    key[i] = d;
                    parent[i] = next;
                }
            }
        }
    }
    edges
}

/// MST-doubling tour: depth-first preorder of the metric MST with shortcuts.
/// Closed length is at most twice the MST weight, hence at most twice the
/// optimal TSP tour.
pub fn tsp_approx(g: &MetricGraph, reqs: &[(ReqId, Request)]) -> CvrpTour {
    let mut by_vertex: HashMap<Vertex, Vec<ReqId>> = HashMap::new();
    for (id, r) in reqs {
        by_vertex.entry(r.vertex).or_default().push(*id);
    }
    let mut verts: Vec<Vertex> = by_vertex.keys().copied().collect();
    verts.sort_unstable();
    if verts.is_empty() {
        return CvrpTour {
            stops: Vec::new(),
            length: 0,
        };
    }
    let mut children: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
    for (p, c) in metric_mst(g, &verts) {
        children.entry(p).or_default().push(c);
    }
    for kids in children.values_mut() {
        kids.sort_unstable();
    }
    let mut order = Vec::with_capacity(verts.len());
    let mut stack = vec![g.depot()];
    while let Some(v) = stack.pop() {
        if v != g.depot() {
            order.push(v);
        }
        if let Some(kids) = children.get(&v) {
            stack.extend(kids.iter().rev());
        }
    }
    let stops: Vec<Stop> = order
        .into_iter()
        .map(|vertex| {
            let mut served = by_vertex.remove(&vertex).unwrap_or_default();
            served.sort_unstable();
            Stop { vertex, served }
        })
        .collect();
    let length = tour_length(g, &stops);
    CvrpTour { stops, length }
}

/// Iterated tour partitioning over the MST-doubling order: return to the
/// depot every `c` requests. All `c` boundary offsets are tried and the
/// shortest result is kept; stop order is never changed.
pub fn cvrp_approx(g: &MetricGraph, reqs: &[(ReqId, Request)], capacity: Capacity) -> CvrpTour {
    let base = tsp_approx(g, reqs);
    let Capacity::Finite(c) = capacity else {
        return base;
    };
    let c = c as usize;
    // request-level sequence in tour order
    let seq: Vec<(ReqId, Vertex)> = base
        .stops
        .iter()
        .flat_map(|s| s.served.iter().map(|&id| (id, s.vertex)))
        .collect();
    if seq.is_empty() {
        return base;
    }
    let build = |shift: usize| -> Vec<Stop> {
        let mut stops = Vec::new();
        let mut block_start = 0usize;
        let mut first = true;
        while block_start < seq.len() {
            let take = if first && shift > 0 {
                shift.min(seq.len() - block_start)
            } else {
                c.min(seq.len() - block_start)
            };
            first = false;
            if !stops.is_empty() {
                stops.push(Stop {
                    vertex: g.depot(),
                    served: Vec::new(),
                });
            }
            let mut block_stops: Vec<Stop> = Vec::new();
            for &(id, v) in &seq[block_start..block_start + take] {
                match block_stops.last_mut() {
                    Some(s) if s.vertex == v => s.served.push(id),
                    _ => block_stops.push(Stop {
                        vertex: v,
                        served: vec![id],
                    }),
                }
            }
            stops.extend(block_stops);
            block_start += take;
        }
        stops
    };
    let mut best: Option<(Length, usize)> = None;
    for shift in 0..c.min(seq.len()) {
        let len = tour_length(g, &build(shift));
        if best.is_none_or(|(bl, _)| len < bl) {
            best = Some((len, shift));
        }
    }
    let (length, shift) = best.expect("nonempty sequence");
    CvrpTour {
        stops: build(shift),
        length,
    }
}

/// Exact TSP over at most `EXACT_BATCH_LIMIT` distinct vertices: Held-Karp
/// over the metric closure, returning the closed length from the depot and
/// the visiting order.
pub fn exact_tsp(g: &MetricGraph, verts: &[Vertex]) -> (Length, Vec<Vertex>) {
    let m = verts.len();
    assert!(m <= 20, "held-karp limit");
    if m == 0 {
        return (0, Vec::new());
    }
    let d = |a: Vertex, b: Vertex| g.distance(a, b).expect("tsp vertex");
    let full = (1usize << m) - 1;
    let mut dp = vec![vec![Length::MAX; m]; full + 1];
    let mut par = vec![vec![usize::MAX; m]; full + 1];
    for j in 0..m {
        dp[1 << j][j] = d(g.depot(), verts[j]);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 || dp[mask][j] == Length::MAX {
                continue;
            }
            for nxt in 0..m {
                if mask & (1 << nxt) != 0 {
                    continue;
                }
                let nm = mask | (1 << nxt);
                let nd = dp[mask][j] + d(verts[j], verts[nxt]);
                if nd < dp[nm][nxt] {
                    dp[nm][nxt] = nd;
                    par[nm][nxt] = j;
                }
            }
        }
    }
    let (mut last, mut best) = (0usize, Length::MAX);
    for j in 0..m {
        let closed = dp[full][j] + d(verts[j], g.depot());
        if closed < best {
            best = closed;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(m);
    let mut mask = full;
    let mut j = last;
    while j != usize::MAX {
        order.push(verts[j]);
        let pj = par[mask][j];
        mask &= !(1 << j);
        j = pj;
    }
    order.reverse();
    (best, order)
}

/// Optimal capacity-respecting tour for at most `EXACT_BATCH_LIMIT`
/// requests: partition them into segments of at most `c`, each served by a
/// Held-Karp-optimal depot loop. Returning to the depot is free by the
/// triangle inequality, so the partition DP is exact.
pub fn exact_cvrp(g: &MetricGraph, reqs: &[(ReqId, Request)], capacity: Capacity) -> CvrpTour {
    let m = reqs.len();
    assert!(m <= EXACT_BATCH_LIMIT, "exact solver limit");
    if m == 0 {
        return CvrpTour {
            stops: Vec::new(),
            length: 0,
        };
    }
    let cap = match capacity {
        Capacity::Finite(c) => (c as usize).min(m),
        Capacity::Unbounded => m,
    };
    let full = (1usize << m) - 1;
    // closed tour length for a request subset, keyed by its distinct
    // positions
    let mut tsp_memo: HashMap<Vec<Vertex>, (Length, Vec<Vertex>)> = HashMap::new();
    let mut segment = |mask: usize| -> (Length, Vec<Vertex>) {
        let mut verts: Vec<Vertex> = (0..m)
            .filter(|&j| mask & (1 << j) != 0)
            .map(|j| reqs[j].1.vertex)
            .collect();
        verts.sort_unstable();
        verts.dedup();
        tsp_memo
            .entry(verts.clone())
            .or_insert_with(|| exact_tsp(g, &verts))
            .clone()
    };
    let mut best = vec![Length::MAX; full + 1];
    let mut choice = vec![0usize; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let mut sub = mask;
        while sub != 0 {
            if sub & low != 0 && (sub as u32).count_ones() as usize <= cap {
                let (seg_len, _) = segment(sub);
                let rest = best[mask ^ sub];
                if rest != Length::MAX && rest + seg_len < best[mask] {
                    best[mask] = rest + seg_len;
                    choice[mask] = sub;
                }
            }
            sub = (sub - 1) & mask;
        }
    }
    // peel segments; the one containing the lowest request id comes first
    let mut parts = Vec::new();
    let mut mask = full;
    while mask != 0 {
        parts.push(choice[mask]);
        mask ^= choice[mask];
    }
    let mut stops = Vec::new();
    for part in parts {
        if !stops.is_empty() {
            stops.push(Stop {
                vertex: g.depot(),
                served: Vec::new(),
            });
        }
        let (_, order) = segment(part);
        for vertex in order {
            let mut served: Vec<ReqId> = (0..m)
                .filter(|&j| part & (1 << j) != 0 && reqs[j].1.vertex == vertex)
                .map(|j| reqs[j].0)
                .collect();
            served.sort_unstable();
            stops.push(Stop { vertex, served });
        }
    }
    CvrpTour {
        length: best[full],
        stops,
    }
}

/// Cut a tour into subtours: repeatedly take the longest stop-sequence
/// prefix whose internal length stays within `cap`, close it via the depot,
/// and continue. Stop order is preserved and capacity segments keep their
/// request counts, so every subtour remains feasible.
pub fn split_tour(g: &MetricGraph, tour: &CvrpTour, cap: Rat) -> Vec<CvrpTour> {
    assert!(cap > rat(0));
    let depot = g.depot();
    let stops = &tour.stops;
    let mut subtours = Vec::new();
    let mut j = 0usize;
    while j < stops.len() {
        if stops[j].vertex == depot {
            j += 1; // boundary depot visits fold into the closure
            continue;
        }
        let mut end = j;
        let mut internal = 0i64;
        while end + 1 < stops.len() {
            let step = g
                .distance(stops[end].vertex, stops[end + 1].vertex)
                .expect("tour vertex");
            if rat(internal + step) > cap {
                break;
            }
            internal += step;
            end += 1;
        }
        let mut slice: Vec<Stop> = stops[j..=end].to_vec();
        while slice.last().is_some_and(|s| s.vertex == depot) {
            slice.pop();
        }
        let length = tour_length(g, &slice);
        subtours.push(CvrpTour {
            stops: slice,
            length,
        });
        j = end + 1;
    }
    subtours
}

/// The windowed-interval CVRP length bound `k(b - a + 2F)` for requests
/// arriving in `[a, b]` when the unit-speed optimum has flow at most `F`.
pub fn cvrp_window_bound(inst: &Instance, a: i64, b: i64, f: Length) -> Length {
    assert!(a <= b);
    inst.vehicles as i64 * (b - a + 2 * f)
}

// ---------------------------------------------------------------------------
// Online driver
// ---------------------------------------------------------------------------

/// Online windowed batching at speed `α+ε`. At each window boundary `iγF`
/// the batch of requests that arrived in the window is toured, the tour is
/// cut into subtours of internal length at most `α(γ+2)F`, and all subtours
/// start immediately on free vehicles.
pub struct SpeedingOnline {
    inst: Instance,
    cfg: SpeedConfig,
    f: Length,
    window: i64,
    pending: Vec<(ReqId, Request)>,
}

impl SpeedingOnline {
    pub fn new(inst: &Instance, f: Length, cfg: SpeedConfig) -> Result<Self, SpeedingError> {
        if cfg.mode == TourMode::Tsp2 && inst.capacity != Capacity::Unbounded {
            return Err(SpeedingError::ModeNeedsUnbounded);
        }
        if f <= 0 {
            return Err(SpeedingError::Metric(MetricError::NonPositiveParam {
                name: "f",
                value: f,
            }));
        }
        Ok(SpeedingOnline {
            inst: inst.clone(),
            cfg,
            f,
            window: 1,
            pending: Vec::new(),
        })
    }

    fn boundary(&self, i: i64) -> Rat {
        self.cfg.gamma * rat(self.f) * rat(i)
    }

    fn realize_subtour(&self, sub: &CvrpTour, start: Rat) -> Vec<Trip> {
        let g = &self.inst.graph;
        let depot = g.depot();
        let mut walk = vec![depot];
        let mut stop_pos = Vec::with_capacity(sub.stops.len());
        for s in &sub.stops {
            let seg = g
                .shortest_path(*walk.last().unwrap(), s.vertex)
                .expect("tour vertex");
            walk.extend_from_slice(&seg[1..]);
            stop_pos.push(walk.len() - 1);
        }
        let seg = g
            .shortest_path(*walk.last().unwrap(), depot)
            .expect("tour vertex");
        walk.extend_from_slice(&seg[1..]);
        // depot positions delimit the physical trips
        let depot_idx: Vec<usize> = walk
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v == depot)
            .map(|(i, _)| i)
            .collect();
        let mut trips = Vec::new();
        let mut at = start;
        for pair in depot_idx.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let piece = walk[lo..=hi].to_vec();
            let len = g.walk_len(&piece).expect("expanded walk");
            let mut served = Vec::new();
            for (s, &pos) in sub.stops.iter().zip(&stop_pos) {
                if pos > lo && pos <= hi {
                    served.extend_from_slice(&s.served);
                }
            }
            served.sort_unstable();
            trips.push(Trip {
                start: at,
                walk: piece,
                served,
            });
            at += rat(len) / self.cfg.speed;
        }
        trips
    }
}

impl OnlineAlgorithm for SpeedingOnline {
    fn on_arrival(&mut self, _now: Rat, id: ReqId, req: Request) {
        self.pending.push((id, req));
    }

    fn next_wake(&self) -> Option<Rat> {
        (!self.pending.is_empty()).then(|| self.boundary(self.window))
    }

    fn act(&mut self, ctx: &ActCtx<'_>) -> Result<Vec<StartTrip>, AlgError> {
        let mut out = Vec::new();
        while !self.pending.is_empty() && ctx.now >= self.boundary(self.window) {
            let window = self.window;
            let upper = self.boundary(window);
            self.window += 1;
            let batch: Vec<(ReqId, Request)> = {
                let (takes, keeps): (Vec<_>, Vec<_>) = self
                    .pending
                    .drain(..)
                    .partition(|(_, r)| rat(r.arrival) < upper);
                self.pending = keeps;
                takes
            };
            if batch.is_empty() {
                continue;
            }
            let tour = match self.cfg.mode {
                TourMode::Exact => {
                    if batch.len() > EXACT_BATCH_LIMIT {
                        return Err(AlgError::BatchTooLarge {
                            window,
                            size: batch.len(),
                            limit: EXACT_BATCH_LIMIT,
                        });
                    }
                    exact_cvrp(&self.inst.graph, &batch, self.inst.capacity)
                }
                TourMode::Tsp2 => tsp_approx(&self.inst.graph, &batch),
                TourMode::Cvrp => cvrp_approx(&self.inst.graph, &batch, self.inst.capacity),
            };
            let cap = rat(self.cfg.alpha) * (self.cfg.gamma + rat(2)) * rat(self.f);
            let subtours = split_tour(&self.inst.graph, &tour, cap);
            let deadline = self.boundary(window + 1);
            let mut free: Vec<bool> = ctx
                .vehicle_free_at
                .iter()
                .map(|&t| t <= ctx.now)
                .collect();
            for sub in &subtours {
                let Some(vehicle) = free.iter().position(|&f| f) else {
                    return Err(AlgError::NoFreeVehicle { window });
                };
                free[vehicle] = false;
                let completion = ctx.now + rat(sub.length) / self.cfg.speed;
                if completion > deadline {
                    return Err(AlgError::MissesDeadline { window });
                }
                out.extend(
                    self.realize_subtour(sub, ctx.now)
                        .into_iter()
                        .map(|trip| StartTrip { vehicle, trip }),
                );
            }
        }
        Ok(out)
    }
}

/// Run the speeding algorithm online; the schedule is validated at speed
/// `α+ε` against the unit-speed instance.
pub fn run_speeding(
    inst: &Instance,
    f: Length,
    cfg: SpeedConfig,
) -> Result<RunOutcome, SpeedingError> {
    let mut algo = SpeedingOnline::new(inst, f, cfg)?;
    Ok(crate::sim::run_online(inst, &mut algo, cfg.speed, None)?)
}
