//! Generators for the adversarial instance families, with structural
//! certificates.
//!
//! The base gadget is a ladder of two mirrored vertex grids hanging off the
//! depot. Its two leaned request streams differ in a single vertex, yet the
//! unique optimal tour for each lean traverses entirely different halves of
//! the grid — an online server must commit before it can tell the leans
//! apart, and every wrong commitment costs one extra length unit. The other
//! families repeat the gadget (with legs, or as glued copies), reduce from
//! Hamiltonian-cycle instances, or drive a capacity-2 vehicle on a 5-vertex
//! tree through an adaptive request stream.
//!
//! All gadget constructions use a half-unit scale: one length unit here is
//! half a unit in the usual description, so depot edges have length 1 and
//! grid edges length 2, keeping everything integral.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::instance::{Capacity, Instance, Request, Schedule, Trip};
use crate::metric::{EdgeSpec, Length, MetricGraph, Vertex, VertexSet};
use crate::oracle::{closed_walk_length, counting_tsp_lower_bound};
use crate::rat::{rat, Rat};
use crate::sim::Adversary;

/// Scale factor between gadget length units and the half-unit descriptions.
pub const GADGET_SCALE: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lean {
    Left,
    Right,
}

impl Lean {
    pub fn parse(c: char) -> Option<Lean> {
        match c {
            'L' | 'l' => Some(Lean::Left),
            'R' | 'r' => Some(Lean::Right),
            _ => None,
        }
    }

    fn side(self) -> usize {
        match self {
            Lean::Left => 0,
            Lean::Right => 1,
        }
    }

    pub fn opposite(self) -> Lean {
        match self {
            Lean::Left => Lean::Right,
            Lean::Right => Lean::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdversaryError {
    #[error("parameter {name} must be at least {min}, got {got}")]
    ParamTooSmall {
        name: &'static str,
        min: i64,
        got: i64,
    },
    #[error("eps {0} does not make the phase count an integer >= 2")]
    BadEps(String),
    #[error("lean vector has {got} entries, expected {want}")]
    LeanCount { got: usize, want: usize },
}

/// The two-sided grid gadget with parameter `p`: rows `0..=p` of seven
/// vertices per side, with row 0 shared between the sides except at its
/// middle vertex. Depot edges have length 1 and grid edges length 2 (the
/// half-unit scale).
#[derive(Debug, Clone)]
pub struct BaseGadget {
    pub p: i64,
    pub graph: MetricGraph,
    ids: HashMap<(i64, usize, usize), Vertex>, // (row, j in 1..=7, side)
}

impl BaseGadget {
    /// Vertex of row `i`, position `j` (1..=7), side `s`.
    pub fn vertex(&self, i: i64, j: usize, lean: Lean) -> Vertex {
        let s = if i == 0 && j != 4 { 0 } else { lean.side() };
        self.ids[&(i, j, s)]
    }

    /// The path `v_1 .. v_7` along row `i` of one side.
    pub fn row_path(&self, i: i64, lean: Lean) -> Vec<Vertex> {
        (1..=7).map(|j| self.vertex(i, j, lean)).collect()
    }

    /// The detour path of row `i` that dips to row `i-1`'s middle vertex:
    /// `v_1, v_2, v_3` of row `i`, the middle of row `i-1`, then `v_5, v_6,
    /// v_7` of row `i`.
    pub fn detour_path(&self, i: i64, lean: Lean) -> Vec<Vertex> {
        assert!(i >= 1);
        vec![
            self.vertex(i, 1, lean),
            self.vertex(i, 2, lean),
            self.vertex(i, 3, lean),
            self.vertex(i - 1, 4, lean),
            self.vertex(i, 5, lean),
            self.vertex(i, 6, lean),
            self.vertex(i, 7, lean),
        ]
    }

    /// All vertices except the depot and the middle vertex of the last row
    /// on the side opposite to `lean` — exactly the requested positions of a
    /// leaned instance.
    pub fn leaned_vertices(&self, lean: Lean) -> VertexSet {
        let excluded = self.vertex(self.p, 4, lean.opposite());
        self.graph
            .vertex_ids()
            .iter()
            .copied()
            .filter(|&v| v != self.graph.depot() && v != excluded)
            .collect()
    }
}

pub fn base_gadget(p: i64) -> Result<BaseGadget, AdversaryError> {
    if p < 2 {
        return Err(AdversaryError::ParamTooSmall {
            name: "p",
            min: 2,
            got: p,
        });
    }
    let mut ids: HashMap<(i64, usize, usize), Vertex> = HashMap::new();
    let mut next: Vertex = 1; // depot is 0
    for i in 0..=p {
        for j in 1..=7 {
            for s in 0..2 {
                if i == 0 && j != 4 && s == 1 {
                    let shared = ids[&(0, j, 0)];
                    ids.insert((i, j, s), shared);
                } else {
                    ids.insert((i, j, s), next);
                    next += 1;
                }
            }
        }
    }
    let mut edges: Vec<EdgeSpec> = Vec::new();
    let mut seen: BTreeMap<(Vertex, Vertex), ()> = BTreeMap::new();
    let mut push = |u: Vertex, v: Vertex, len: Length, edges: &mut Vec<EdgeSpec>| {
        let key = (u.min(v), u.max(v));
        if seen.insert(key, ()).is_none() {
            edges.push(EdgeSpec::new(u, v, len));
        }
    };
    for i in 0..=p {
        for s in 0..2 {
            // depot edges at the row ends
            push(0, ids[&(i, 1, s)], 1, &mut edges);
            push(0, ids[&(i, 7, s)], 1, &mut edges);
            // row path edges
            for j in 1..7 {
                push(ids[&(i, j, s)], ids[&(i, j + 1, s)], 2, &mut edges);
            }
        }
    }
    for i in 1..=p {
        for s in 0..2 {
            // detour edges to the previous row's middle vertex
            push(ids[&(i, 3, s)], ids[&(i - 1, 4, s)], 2, &mut edges);
            push(ids[&(i - 1, 4, s)], ids[&(i, 5, s)], 2, &mut edges);
        }
    }
    let vertices: Vec<Vertex> = (0..next).collect();
    let graph = MetricGraph::new(vertices, edges, 0).expect("gadget graph");
    Ok(BaseGadget { p, graph, ids })
}

/// Request stream of one leaned base instance, as (arrival, vertex) pairs in
/// gadget units. Segment 0 has length 7 (half-units), segments `1..=p`
/// length 14; segment `i` starts at `7(2i-1)`.
fn base_requests(gadget: &BaseGadget, lean: Lean) -> Vec<Request> {
    let p = gadget.p;
    let seg_start = |i: i64| -> i64 {
        if i == 0 {
            0
        } else {
            GADGET_SCALE * 7 * (2 * i - 1)
        }
    };
    let mut reqs = Vec::new();
    for i in 0..p {
        let t = seg_start(i);
        let mut verts = VertexSet::new();
        for s in [Lean::Left, Lean::Right] {
            for j in 1..=7 {
                verts.insert(gadget.vertex(i, j, s));
            }
        }
        for v in verts {
            reqs.push(Request {
                arrival: t,
                vertex: v,
            });
        }
    }
    // last segment: both sides except the opposite middle vertex
    let t = seg_start(p);
    let mut verts = VertexSet::new();
    for s in [Lean::Left, Lean::Right] {
        for j in 1..=7 {
            if j != 4 {
                verts.insert(gadget.vertex(p, j, s));
            }
        }
    }
    verts.insert(gadget.vertex(p, 4, lean));
    for v in verts {
        reqs.push(Request {
            arrival: t,
            vertex: v,
        });
    }
    reqs
}

/// The single-vehicle uncapacitated leaned base instance.
pub fn base_instance(p: i64, lean: Lean) -> Result<Instance, AdversaryError> {
    let gadget = base_gadget(p)?;
    let reqs = base_requests(&gadget, lean);
    Ok(Instance::new(gadget.graph.clone(), 1, Capacity::Unbounded, reqs)
        .expect("gadget instance is valid"))
}

#[derive(Debug, Clone)]
pub struct TourCertificate {
    /// Canonical optimal tour, as a stop sequence (depot returns implicit).
    pub stops: Vec<Vertex>,
    /// Tour length in gadget units (`GADGET_SCALE` per half-unit).
    pub length: Length,
    /// The matching distance-counting lower bound.
    pub counting_bound: Length,
    /// Tour length in half-units: `7(2p+1)`.
    pub half_units: i64,
}

/// Build the canonical optimal tour for the leaned vertex set — the row
/// paths of the leaned side plus the detour paths of the other — and certify
/// its optimality: its length equals the distance-counting lower bound,
/// which equals `7(2p+1)` half-units.
pub fn certify_base_tour(p: i64, lean: Lean) -> Result<TourCertificate, AdversaryError> {
    let gadget = base_gadget(p)?;
    let mut stops = Vec::new();
    for i in 0..=p {
        stops.extend(gadget.row_path(i, lean));
    }
    for i in 1..=p {
        stops.extend(gadget.detour_path(i, lean.opposite()));
    }
    let length = closed_walk_length(&gadget.graph, &stops).expect("tour vertices");
    let members = gadget.leaned_vertices(lean);
    // the tour covers every leaned vertex
    let covered: VertexSet = stops.iter().copied().collect();
    assert_eq!(covered, members, "canonical tour misses vertices");
    let counting_bound =
        counting_tsp_lower_bound(&gadget.graph, &members).expect("positive spacing");
    assert_eq!(length, counting_bound, "canonical tour is not optimal");
    assert_eq!(length, GADGET_SCALE * 7 * (2 * p + 1));
    Ok(TourCertificate {
        stops,
        length,
        counting_bound,
        half_units: 7 * (2 * p + 1),
    })
}

/// The canonical low-flow schedule for a leaned base instance: the leaned
/// row path in segment 0, then in each later segment the opposite side's
/// detour path (clearing the previous row's leftover middle vertex) followed
/// by the leaned row path. Every flow time is at most two segment lengths.
pub fn reference_base_schedule(p: i64, lean: Lean) -> Result<(Instance, Schedule), AdversaryError> {
    let gadget = base_gadget(p)?;
    let inst = base_instance(p, lean)?;
    let find = |arrival: i64, vertex: Vertex| -> usize {
        inst.requests
            .iter()
            .position(|r| r.arrival == arrival && r.vertex == vertex)
            .expect("request exists")
    };
    let seg_start = |i: i64| -> i64 {
        if i == 0 {
            0
        } else {
            GADGET_SCALE * 7 * (2 * i - 1)
        }
    };
    let seg_len = GADGET_SCALE * 7;
    let cycle = |path: &[Vertex]| -> Vec<Vertex> {
        let mut walk = vec![gadget.graph.depot()];
        walk.extend_from_slice(path);
        walk.push(gadget.graph.depot());
        walk
    };
    let mut trips = Vec::new();
    // segment 0: the leaned row path serves all row-0 requests except the
    // opposite middle vertex
    {
        let path = gadget.row_path(0, lean);
        let served: Vec<usize> = path.iter().map(|&v| find(0, v)).collect();
        trips.push(Trip {
            start: rat(0),
            walk: cycle(&path),
            served,
        });
    }
    for i in 1..=p {
        let b = seg_start(i);
        // detour trip: previous row's opposite middle vertex plus this row's
        // opposite side
        let path = gadget.detour_path(i, lean.opposite());
        let mut served = vec![find(seg_start(i - 1), gadget.vertex(i - 1, 4, lean.opposite()))];
        for j in [1, 2, 3, 5, 6, 7] {
            served.push(find(b, gadget.vertex(i, j, lean.opposite())));
        }
        trips.push(Trip {
            start: rat(b),
            walk: cycle(&path),
            served,
        });
        // leaned row path
        let path = gadget.row_path(i, lean);
        let served: Vec<usize> = path.iter().map(|&v| find(b, v)).collect();
        trips.push(Trip {
            start: rat(b + seg_len),
            walk: cycle(&path),
            served,
        });
    }
    Ok((
        inst,
        Schedule {
            vehicles: vec![trips],
        },
    ))
}

// ---------------------------------------------------------------------------
// Repeated families
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum LowerBoundKind {
    /// Gadget plus `p` depot legs; `p` phases of length `L + p` half-units,
    /// leg requests trickling in at the end of each phase.
    Legs { p: i64, leans: Vec<Lean> },
    /// `p` glued gadget copies, `p` phases of length `L`; `p` is derived
    /// from `eps` via `(1+eps)/(20·eps)` and must be an integer.
    SpeedingEps { eps: Rat, leans: Vec<Lean> },
    /// Hamiltonian-cycle reduction over a cycle graph with `n_bar` vertices:
    /// `n_bar²` phases of length `(2·n_bar+1)·n_bar`.
    Hamiltonian { n_bar: i64 },
    /// `n_bar` glued copies of a cycle graph, one phase of length `n_bar`
    /// per copy.
    Copies { n_bar: i64 },
}

/// Phase count for the speeding family: `1/(20 eps) + 1/20`, which is an
/// integer exactly when `eps = 1/(20p - 1)`.
pub fn speeding_phase_count(eps: Rat) -> Result<i64, AdversaryError> {
    if eps <= rat(0) {
        return Err(AdversaryError::BadEps(crate::rat::fmt_rat(eps)));
    }
    let p = (rat(1) + eps) / (rat(20) * eps);
    if !p.is_integer() || p.to_integer() < 2 {
        return Err(AdversaryError::BadEps(crate::rat::fmt_rat(eps)));
    }
    Ok(p.to_integer())
}

pub fn gen_lower_bound(kind: &LowerBoundKind) -> Result<Instance, AdversaryError> {
    match kind {
        LowerBoundKind::Legs { p, leans } => legs_instance(*p, leans),
        LowerBoundKind::SpeedingEps { eps, leans } => speeding_instance(*eps, leans),
        LowerBoundKind::Hamiltonian { n_bar } => hamiltonian_instance(*n_bar),
        LowerBoundKind::Copies { n_bar } => copies_instance(*n_bar),
    }
}

fn legs_instance(p: i64, leans: &[Lean]) -> Result<Instance, AdversaryError> {
    let gadget = base_gadget(p)?;
    if leans.len() != p as usize {
        return Err(AdversaryError::LeanCount {
            got: leans.len(),
            want: p as usize,
        });
    }
    let mut vertices = gadget.graph.vertex_ids().to_vec();
    let mut edges = gadget.graph.edges().to_vec();
    let first_leg = *vertices.iter().max().unwrap() + 1;
    for j in 0..p {
        let u = first_leg + j as u32;
        vertices.push(u);
        edges.push(EdgeSpec::new(0, u, 1));
    }
    let graph = MetricGraph::new(vertices, edges, 0).expect("legs graph");
    let l_half = 7 * (2 * p + 1);
    let phase_len = GADGET_SCALE * (l_half + p);
    let mut reqs = Vec::new();
    for (h, &lean) in leans.iter().enumerate() {
        let offset = h as i64 * phase_len;
        for r in base_requests(&gadget, lean) {
            reqs.push(Request {
                arrival: offset + r.arrival,
                vertex: r.vertex,
            });
        }
        for j in 0..p {
            reqs.push(Request {
                arrival: offset + GADGET_SCALE * (l_half + j),
                vertex: first_leg + j as u32,
            });
        }
    }
    Ok(Instance::new(graph, 1, Capacity::Unbounded, reqs).expect("legs instance"))
}

fn speeding_instance(eps: Rat, leans: &[Lean]) -> Result<Instance, AdversaryError> {
    let p = speeding_phase_count(eps)?;
    if leans.len() != p as usize {
        return Err(AdversaryError::LeanCount {
            got: leans.len(),
            want: p as usize,
        });
    }
    let gadget = base_gadget(p)?;
    let base_n = gadget.graph.vertex_count() as u32;
    // glue p copies at the depot: copy h maps gadget vertex v (nonzero) to
    // v + h*(base_n - 1)
    let copy_of = |v: Vertex, h: i64| -> Vertex {
        if v == 0 {
            0
        } else {
            v + h as u32 * (base_n - 1)
        }
    };
    let mut vertices = vec![0u32];
    let mut edges = Vec::new();
    for h in 0..p {
        for &v in gadget.graph.vertex_ids() {
            if v != 0 {
                vertices.push(copy_of(v, h));
            }
        }
        for e in gadget.graph.edges() {
            edges.push(EdgeSpec::new(copy_of(e.u, h), copy_of(e.v, h), e.len));
        }
    }
    let graph = MetricGraph::new(vertices, edges, 0).expect("glued graph");
    let phase_len = GADGET_SCALE * 7 * (2 * p + 1);
    let mut reqs = Vec::new();
    for (h, &lean) in leans.iter().enumerate() {
        let offset = h as i64 * phase_len;
        for r in base_requests(&gadget, lean) {
            reqs.push(Request {
                arrival: offset + r.arrival,
                vertex: copy_of(r.vertex, h as i64),
            });
        }
    }
    Ok(Instance::new(graph, 1, Capacity::Unbounded, reqs).expect("speeding instance"))
}

/// Cycle graph `0 - 1 - ... - (n-1) - 0` with unit lengths; its optimal tour
/// has length exactly `n`, which keeps the reductions checkable.
fn cycle_graph(n: i64) -> (Vec<Vertex>, Vec<EdgeSpec>) {
    let vertices: Vec<Vertex> = (0..n as u32).collect();
    let mut edges = Vec::new();
    for v in 0..n as u32 {
        edges.push(EdgeSpec::new(v, (v + 1) % n as u32, 1));
    }
    (vertices, edges)
}

fn hamiltonian_instance(n_bar: i64) -> Result<Instance, AdversaryError> {
    if n_bar < 3 {
        return Err(AdversaryError::ParamTooSmall {
            name: "n_bar",
            min: 3,
            got: n_bar,
        });
    }
    let (mut vertices, mut edges) = cycle_graph(n_bar);
    for i in 0..n_bar as u32 {
        let u = n_bar as u32 + i;
        vertices.push(u);
        edges.push(EdgeSpec::new(0, u, n_bar));
    }
    let graph = MetricGraph::new(vertices, edges, 0).expect("hamiltonian graph");
    let phase_len = (2 * n_bar + 1) * n_bar;
    let mut reqs = Vec::new();
    for h in 0..n_bar * n_bar {
        let b = h * phase_len;
        for v in 1..n_bar as u32 {
            reqs.push(Request {
                arrival: b,
                vertex: v,
            });
        }
        for i in 1..=n_bar {
            reqs.push(Request {
                arrival: b + (2 * i - 1) * n_bar,
                vertex: n_bar as u32 + (i - 1) as u32,
            });
        }
    }
    Ok(Instance::new(graph, 1, Capacity::Unbounded, reqs).expect("hamiltonian instance"))
}

fn copies_instance(n_bar: i64) -> Result<Instance, AdversaryError> {
    if n_bar < 3 {
        return Err(AdversaryError::ParamTooSmall {
            name: "n_bar",
            min: 3,
            got: n_bar,
        });
    }
    let copy_of = |v: Vertex, h: i64| -> Vertex {
        if v == 0 {
            0
        } else {
            v + h as u32 * (n_bar as u32 - 1)
        }
    };
    let mut vertices = vec![0u32];
    let mut edges = Vec::new();
    let (_, base_edges) = cycle_graph(n_bar);
    for h in 0..n_bar {
        for v in 1..n_bar as u32 {
            vertices.push(copy_of(v, h));
        }
        for e in &base_edges {
            edges.push(EdgeSpec::new(copy_of(e.u, h), copy_of(e.v, h), e.len));
        }
    }
    let graph = MetricGraph::new(vertices, edges, 0).expect("copies graph");
    let l = n_bar; // optimal tour length of the cycle
    let mut reqs = Vec::new();
    for h in 0..n_bar {
        for v in 1..n_bar as u32 {
            reqs.push(Request {
                arrival: h * l,
                vertex: copy_of(v, h),
            });
        }
    }
    Ok(Instance::new(graph, 1, Capacity::Unbounded, reqs).expect("copies instance"))
}

// ---------------------------------------------------------------------------
// Adaptive capacity-2 adversary
// ---------------------------------------------------------------------------

/// The 5-vertex tree of the capacity lower bound: depot, a hub `v1` with two
/// leaves `v2`, `v3`, and a separate depot leaf `v4`. All edges unit length.
pub fn capacity_tree() -> MetricGraph {
    MetricGraph::new(
        vec![0, 1, 2, 3, 4],
        vec![
            EdgeSpec::new(0, 1, 1),
            EdgeSpec::new(1, 2, 1),
            EdgeSpec::new(1, 3, 1),
            EdgeSpec::new(0, 4, 1),
        ],
        0,
    )
    .expect("capacity tree")
}

/// Adaptive request stream on the capacity tree: per phase of length `10p`,
/// three opening requests, four requests every 8 units, one adaptively
/// placed request, and a tail of paired requests at the depot leaf. The
/// adaptive vertex is `v2` if the phase's opening `v1` request was observed
/// leaving in a trip together with a `v2` request, `v3` if it left without
/// one, and `v2` by default if it is still unserved at decision time.
pub struct CapacityAdversary {
    p: i64,
    emissions: VecDeque<(i64, Payload)>,
    /// Per phase: how the opening `v1` request was served, once observed.
    v1_paired_with_v2: Vec<Option<bool>>,
    phase_starts: Vec<i64>,
}

#[derive(Debug, Clone)]
enum Payload {
    Fixed(Vec<Vertex>),
    Adaptive { phase: usize },
}

pub fn capacity_adversary(p: i64) -> Result<(Instance, CapacityAdversary), AdversaryError> {
    if p < 2 {
        return Err(AdversaryError::ParamTooSmall {
            name: "p",
            min: 2,
            got: p,
        });
    }
    let graph = capacity_tree();
    let skeleton = Instance::new(graph, 1, Capacity::Finite(2), Vec::new())
        .expect("capacity skeleton");
    let mut emissions = VecDeque::new();
    let mut phase_starts = Vec::new();
    for h in 0..p {
        let b = 10 * h * p;
        phase_starts.push(b);
        emissions.push_back((b, Payload::Fixed(vec![1, 2, 3])));
        for j in 1..p {
            emissions.push_back((b + 8 * j - 4, Payload::Fixed(vec![2, 2, 3, 3])));
        }
        emissions.push_back((
            b + 8 * p - 4,
            Payload::Adaptive { phase: h as usize },
        ));
        for j in 1..=p {
            emissions.push_back((b + 8 * p + 2 * (j - 1), Payload::Fixed(vec![4, 4])));
        }
    }
    Ok((
        skeleton,
        CapacityAdversary {
            p,
            emissions,
            v1_paired_with_v2: vec![None; p as usize],
            phase_starts,
        },
    ))
}

impl CapacityAdversary {
    pub fn requests_per_phase(&self) -> i64 {
        6 * self.p
    }

    /// The adaptive choices made so far (`None` where undecided).
    pub fn choices(&self) -> Vec<Option<Vertex>> {
        self.v1_paired_with_v2
            .iter()
            .map(|o| o.map(|with_v2| if with_v2 { 2 } else { 3 }))
            .collect()
    }
}

impl Adversary for CapacityAdversary {
    fn next_emission_time(&self) -> Option<i64> {
        self.emissions.front().map(|&(t, _)| t)
    }

    fn emit(&mut self, t: i64) -> Vec<Request> {
        let (te, payload) = self.emissions.pop_front().expect("emission scheduled");
        debug_assert_eq!(te, t);
        let verts = match payload {
            Payload::Fixed(vs) => vs,
            Payload::Adaptive { phase } => {
                let v = match self.v1_paired_with_v2[phase] {
                    Some(true) => 2,
                    Some(false) => 3,
                    None => 2, // unserved opening request: flow is already large
                };
                vec![v]
            }
        };
        verts
            .into_iter()
            .map(|vertex| Request { arrival: t, vertex })
            .collect()
    }

    fn observe_trip_start(&mut self, _start: Rat, _walk: &[Vertex], served: &[(i64, Vertex)]) {
        for (phase, &b) in self.phase_starts.iter().enumerate() {
            if served.contains(&(b, 1)) {
                let with_v2 = served.iter().any(|&(_, v)| v == 2);
                self.v1_paired_with_v2[phase] = Some(with_v2);
            }
        }
    }
}

/// The fixed-choice instance the adversary realizes for a given `v*` vector,
/// and the reference schedule achieving maximum flow at most 16 on it. The
/// schedule knows each phase's choice upfront (it plays the offline
/// optimum's pattern); no online algorithm can do the same against the
/// adaptive stream.
pub fn reference_capacity_run(
    p: i64,
    choices: &[Vertex],
) -> Result<(Instance, Schedule), AdversaryError> {
    if p < 2 {
        return Err(AdversaryError::ParamTooSmall {
            name: "p",
            min: 2,
            got: p,
        });
    }
    if choices.len() != p as usize {
        return Err(AdversaryError::LeanCount {
            got: choices.len(),
            want: p as usize,
        });
    }
    assert!(choices.iter().all(|&v| v == 2 || v == 3));
    let graph = capacity_tree();
    let mut reqs = Vec::new();
    for (h, &vstar) in choices.iter().enumerate() {
        let b = 10 * h as i64 * p;
        for v in [1u32, 2, 3] {
            reqs.push(Request {
                arrival: b,
                vertex: v,
            });
        }
        for j in 1..p {
            for v in [2u32, 2, 3, 3] {
                reqs.push(Request {
                    arrival: b + 8 * j - 4,
                    vertex: v,
                });
            }
        }
        reqs.push(Request {
            arrival: b + 8 * p - 4,
            vertex: vstar,
        });
        for j in 1..=p {
            for _ in 0..2 {
                reqs.push(Request {
                    arrival: b + 8 * p + 2 * (j - 1),
                    vertex: 4,
                });
            }
        }
    }
    let inst = Instance::new(graph, 1, Capacity::Finite(2), reqs).expect("capacity instance");
    // request lookup: nth unserved request at (arrival, vertex)
    let mut used = vec![false; inst.requests.len()];
    let mut take = |arrival: i64, vertex: Vertex| -> usize {
        let id = inst
            .requests
            .iter()
            .enumerate()
            .position(|(i, r)| !used[i] && r.arrival == arrival && r.vertex == vertex)
            .expect("request exists");
        used[id] = true;
        id
    };
    let pair_walk = |v: Vertex| -> Vec<Vertex> { vec![0, 1, v, 1, 0] };
    let mut trips = Vec::new();
    for (h, &vstar) in choices.iter().enumerate() {
        let b = 10 * h as i64 * p;
        let heavy = vstar; // the side with 2p requests
        let light = if vstar == 2 { 3 } else { 2 };
        // opening trip pairs v1 with the light side
        trips.push(Trip {
            start: rat(b),
            walk: pair_walk(light),
            served: vec![take(b, 1), take(b, light)],
        });
        for j in 1..p {
            // heavy pair: previous leftover (or the opening heavy request)
            // plus one fresh
            let older = if j == 1 { b } else { b + 8 * (j - 1) - 4 };
            trips.push(Trip {
                start: rat(b + 8 * j - 4),
                walk: pair_walk(heavy),
                served: vec![take(older, heavy), take(b + 8 * j - 4, heavy)],
            });
            // light pair: both fresh
            trips.push(Trip {
                start: rat(b + 8 * j),
                walk: pair_walk(light),
                served: vec![take(b + 8 * j - 4, light), take(b + 8 * j - 4, light)],
            });
        }
        // closing heavy pair: the last leftover plus the adaptive request
        trips.push(Trip {
            start: rat(b + 8 * p - 4),
            walk: pair_walk(heavy),
            served: vec![take(b + 8 * p - 12, heavy), take(b + 8 * p - 4, heavy)],
        });
        for j in 1..=p {
            let t = b + 8 * p + 2 * (j - 1);
            trips.push(Trip {
                start: rat(t),
                walk: vec![0, 4, 0],
                served: vec![take(t, 4), take(t, 4)],
            });
        }
    }
    Ok((
        inst,
        Schedule {
            vehicles: vec![trips],
        },
    ))
}
