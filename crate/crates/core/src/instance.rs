//! Problem instances, schedules, flow-time validation, document
//! serialization, and seeded feasible-instance generation.
//!
//! A schedule is `k` sequences of depot-to-depot trips. `validate` replays a
//! schedule against its instance with exact rational travel times (lengths
//! divided by the speed factor) and either returns the per-request flow
//! report or a diagnostic for the first violated invariant.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::{EdgeSpec, Length, MetricError, MetricGraph, RootedTree, Vertex, VertexSet};
use crate::rat::{rat, Rat, RatRepr};

pub type ReqId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    /// Arrival time, in the same integer unit as edge lengths.
    pub arrival: i64,
    /// Delivery vertex; never the depot.
    pub vertex: Vertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(u32),
    Unbounded,
}

impl Capacity {
    pub fn allows(&self, n: usize) -> bool {
        match self {
            Capacity::Finite(c) => n <= *c as usize,
            Capacity::Unbounded => true,
        }
    }

    pub fn as_finite(&self) -> Option<u32> {
        match self {
            Capacity::Finite(c) => Some(*c),
            Capacity::Unbounded => None,
        }
    }
}

impl std::fmt::Display for Capacity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Capacity::Finite(c) => write!(f, "{c}"),
            Capacity::Unbounded => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: MetricGraph,
    pub vehicles: usize,
    pub capacity: Capacity,
    pub requests: Vec<Request>,
}

impl Instance {
    pub fn new(
        graph: MetricGraph,
        vehicles: usize,
        capacity: Capacity,
        requests: Vec<Request>,
    ) -> Result<Self, InstanceError> {
        if vehicles < 1 {
            return Err(InstanceError::NoVehicles);
        }
        if let Capacity::Finite(0) = capacity {
            return Err(InstanceError::ZeroCapacity);
        }
        for (i, r) in requests.iter().enumerate() {
            if !graph.contains(r.vertex) {
                return Err(InstanceError::Metric(MetricError::UnknownVertex(r.vertex)));
            }
            if r.vertex == graph.depot() {
                return Err(InstanceError::RequestAtDepot { request: i });
            }
            if r.arrival < 0 {
                return Err(InstanceError::NegativeArrival { request: i });
            }
        }
        Ok(Instance {
            graph,
            vehicles,
            capacity,
            requests,
        })
    }

    /// Positions of a request subset, with arrival times erased.
    pub fn positions(&self, reqs: &[ReqId]) -> VertexSet {
        reqs.iter().map(|&r| self.requests[r].vertex).collect()
    }

    pub fn tree(&self) -> Result<RootedTree, MetricError> {
        RootedTree::from_graph(self.graph.clone())
    }
}

/// A depot-to-depot vehicle movement serving up to `c` requests, committed
/// irrevocably at its start time. The walk is a vertex sequence whose
/// consecutive entries are graph-adjacent; the depot appears only at the two
/// ends. Each served request is delivered at the walk's first visit of its
/// vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub start: Rat,
    pub walk: Vec<Vertex>,
    pub served: Vec<ReqId>,
}

/// `k` trip sequences, one per vehicle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub vehicles: Vec<Vec<Trip>>,
}

impl Schedule {
    pub fn empty(k: usize) -> Self {
        Schedule {
            vehicles: vec![Vec::new(); k],
        }
    }

    pub fn trips(&self) -> impl Iterator<Item = (usize, &Trip)> {
        self.vehicles
            .iter()
            .enumerate()
            .flat_map(|(v, trips)| trips.iter().map(move |t| (v, t)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub max_flow: Rat,
    pub per_request: Vec<Rat>,
}

impl FlowReport {
    pub fn empty() -> Self {
        FlowReport {
            max_flow: rat(0),
            per_request: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error("instance needs at least one vehicle")]
    NoVehicles,
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("request {request} is located at the depot")]
    RequestAtDepot { request: usize },
    #[error("request {request} has a negative arrival time")]
    NegativeArrival { request: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("vehicle count mismatch: schedule has {got}, instance has {want}")]
    VehicleCount { got: usize, want: usize },
    #[error("vehicle {vehicle}: trip {trip} walk is not a depot-to-depot cycle")]
    BadWalkEnds { vehicle: usize, trip: usize },
    #[error("vehicle {vehicle}: trip {trip} visits the depot mid-walk")]
    DepotMidWalk { vehicle: usize, trip: usize },
    #[error("vehicle {vehicle}: trip {trip} walk steps over non-edge ({u}, {v})")]
    NonAdjacentStep {
        vehicle: usize,
        trip: usize,
        u: Vertex,
        v: Vertex,
    },
    #[error("vehicle {vehicle}: trip {trip} serves {served} requests, capacity is {capacity}")]
    CapacityExceeded {
        vehicle: usize,
        trip: usize,
        served: usize,
        capacity: u32,
    },
    #[error("vehicle {vehicle}: trip {trip} starts before trip {} completes", trip - 1)]
    OverlappingTrips { vehicle: usize, trip: usize },
    #[error("vehicle {vehicle}: trip {trip} starts before the arrival of request {request}")]
    ServeBeforeArrival {
        vehicle: usize,
        trip: usize,
        request: ReqId,
    },
    #[error("vehicle {vehicle}: trip {trip} never visits the vertex of request {request}")]
    VertexNotVisited {
        vehicle: usize,
        trip: usize,
        request: ReqId,
    },
    #[error("request {request} is served by more than one trip")]
    DoubleServed { request: ReqId },
    #[error("request {request} is never served")]
    Unserved { request: ReqId },
    #[error("unknown request index {request}")]
    UnknownRequest { request: ReqId },
    #[error("speed factor must be at least 1")]
    BadSpeed,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Replay `sch` against `inst` with travel times `len/speed` and verify every
/// trip and schedule invariant. Returns the flow report on success.
pub fn validate(
    inst: &Instance,
    sch: &Schedule,
    speed: Rat,
) -> Result<FlowReport, ValidationError> {
    if speed < rat(1) {
        return Err(ValidationError::BadSpeed);
    }
    if sch.vehicles.len() != inst.vehicles {
        return Err(ValidationError::VehicleCount {
            got: sch.vehicles.len(),
            want: inst.vehicles,
        });
    }
    let depot = inst.graph.depot();
    let mut serve_time: Vec<Option<Rat>> = vec![None; inst.requests.len()];
    for (vehicle, trips) in sch.vehicles.iter().enumerate() {
        let mut prev_completion: Option<Rat> = None;
        for (trip_no, trip) in trips.iter().enumerate() {
            let walk = &trip.walk;
            if walk.len() < 3 || walk[0] != depot || *walk.last().unwrap() != depot {
                return Err(ValidationError::BadWalkEnds {
                    vehicle,
                    trip: trip_no,
                });
            }
            if walk[1..walk.len() - 1].contains(&depot) {
                return Err(ValidationError::DepotMidWalk {
                    vehicle,
                    trip: trip_no,
                });
            }
            if !inst.capacity.allows(trip.served.len()) {
                return Err(ValidationError::CapacityExceeded {
                    vehicle,
                    trip: trip_no,
                    served: trip.served.len(),
                    capacity: inst.capacity.as_finite().unwrap_or(u32::MAX),
                });
            }
            if let Some(prev) = prev_completion {
                if trip.start < prev {
                    return Err(ValidationError::OverlappingTrips {
                        vehicle,
                        trip: trip_no,
                    });
                }
            }
            // prefix travel times along the walk
            let mut reach = Vec::with_capacity(walk.len());
            let mut at = trip.start;
            reach.push(at);
            for w in walk.windows(2) {
                let len = inst.graph.edge_len(w[0], w[1]).ok_or({
                    ValidationError::NonAdjacentStep {
                        vehicle,
                        trip: trip_no,
                        u: w[0],
                        v: w[1],
                    }
                })?;
                at += rat(len) / speed;
                reach.push(at);
            }
            prev_completion = Some(at);
            for &req in &trip.served {
                let r = inst
                    .requests
                    .get(req)
                    .ok_or(ValidationError::UnknownRequest { request: req })?;
                if rat(r.arrival) > trip.start {
                    return Err(ValidationError::ServeBeforeArrival {
                        vehicle,
                        trip: trip_no,
                        request: req,
                    });
                }
                let first_visit = walk.iter().position(|&v| v == r.vertex).ok_or({
                    ValidationError::VertexNotVisited {
                        vehicle,
                        trip: trip_no,
                        request: req,
                    }
                })?;
                if serve_time[req].replace(reach[first_visit]).is_some() {
                    return Err(ValidationError::DoubleServed { request: req });
                }
            }
        }
    }
    let mut per_request = Vec::with_capacity(inst.requests.len());
    for (i, t) in serve_time.iter().enumerate() {
        match t {
            Some(t) => per_request.push(*t - rat(inst.requests[i].arrival)),
            None => return Err(ValidationError::Unserved { request: i }),
        }
    }
    let max_flow = per_request.iter().copied().max().unwrap_or_else(|| rat(0));
    Ok(FlowReport {
        max_flow,
        per_request,
    })
}

// ---------------------------------------------------------------------------
// Document serialization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<EdgeSpec>,
    pub depot: Vertex,
    pub k: usize,
    pub capacity: CapacityDoc,
    pub requests: Vec<RequestDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestDoc {
    pub t: i64,
    pub v: Vertex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapacityDoc {
    Finite(u32),
    Word(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    pub vehicles: Vec<Vec<TripDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripDoc {
    pub start: RatRepr,
    pub walk: Vec<Vertex>,
    pub served: Vec<ReqId>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DocError {
    #[error("malformed document: {0}")]
    Syntax(String),
    #[error("bad field {field}: {what}")]
    Field { field: &'static str, what: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl Instance {
    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            vertices: self.graph.vertex_ids().to_vec(),
            edges: self.graph.edges().to_vec(),
            depot: self.graph.depot(),
            k: self.vehicles,
            capacity: match self.capacity {
                Capacity::Finite(c) => CapacityDoc::Finite(c),
                Capacity::Unbounded => CapacityDoc::Word("inf".to_string()),
            },
            requests: self
                .requests
                .iter()
                .map(|r| RequestDoc {
                    t: r.arrival,
                    v: r.vertex,
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self, DocError> {
        let capacity = match &doc.capacity {
            CapacityDoc::Finite(c) => Capacity::Finite(*c),
            CapacityDoc::Word(w) if w == "inf" => Capacity::Unbounded,
            CapacityDoc::Word(w) => {
                return Err(DocError::Field {
                    field: "capacity",
                    what: format!("expected a positive integer or \"inf\", got {w:?}"),
                })
            }
        };
        let graph = MetricGraph::new(doc.vertices.clone(), doc.edges.clone(), doc.depot)?;
        let requests = doc
            .requests
            .iter()
            .map(|r| Request {
                arrival: r.t,
                vertex: r.v,
            })
            .collect();
        Ok(Instance::new(graph, doc.k, capacity, requests)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DocError> {
        let doc: InstanceDoc =
            serde_json::from_str(text).map_err(|e| DocError::Syntax(e.to_string()))?;
        Instance::from_doc(&doc)
    }
}

impl Schedule {
    pub fn to_doc(&self) -> ScheduleDoc {
        ScheduleDoc {
            vehicles: self
                .vehicles
                .iter()
                .map(|trips| {
                    trips
                        .iter()
                        .map(|t| TripDoc {
                            start: t.start.into(),
                            walk: t.walk.clone(),
                            served: t.served.clone(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ScheduleDoc) -> Result<Self, DocError> {
        let mut vehicles = Vec::with_capacity(doc.vehicles.len());
        for trips in &doc.vehicles {
            let mut seq = Vec::with_capacity(trips.len());
            for t in trips {
                let start = Rat::try_from(&t.start).map_err(|what| DocError::Field {
                    field: "start",
                    what,
                })?;
                seq.push(Trip {
                    start,
                    walk: t.walk.clone(),
                    served: t.served.clone(),
                });
            }
            vehicles.push(seq);
        }
        Ok(Schedule { vehicles })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DocError> {
        let doc: ScheduleDoc =
            serde_json::from_str(text).map_err(|e| DocError::Syntax(e.to_string()))?;
        Schedule::from_doc(&doc)
    }
}

// ---------------------------------------------------------------------------
// Feasible-instance generation
// ---------------------------------------------------------------------------

/// Parameters for `generate_feasible`. The generator builds a witness
/// schedule first — random capacity-respecting trips, each of length at most
/// `f_target` with every served request's flow at most `f_target` — and then
/// emits exactly the requests the witness serves. The witness certifies that
/// the offline optimum is at most `f_target`.
#[derive(Debug, Clone)]
pub struct GenParams {
    /// Number of tree vertices (depot included).
    pub tree_size: usize,
    pub vehicles: usize,
    pub capacity: Capacity,
    /// Vehicles stop starting new trips after this time.
    pub horizon: i64,
    pub f_target: Length,
    /// Largest edge length to sample.
    pub max_edge_len: Length,
    /// Largest idle gap between a vehicle's consecutive witness trips; small
    /// values pack the schedule and produce heavy bundles.
    pub max_idle: i64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("parameter {0} must be positive")]
    NonPositive(&'static str),
    #[error("unsatisfiable parameters: no vertex has a round trip within f_target={0}")]
    NoReachableVertex(Length),
}

pub fn generate_feasible(seed: u64, params: &GenParams) -> Result<(Instance, Schedule), GenError> {
    if params.tree_size < 2 {
        return Err(GenError::NonPositive("tree_size"));
    }
    if params.vehicles < 1 {
        return Err(GenError::NonPositive("vehicles"));
    }
    if params.horizon <= 0 {
        return Err(GenError::NonPositive("horizon"));
    }
    if params.f_target <= 0 {
        return Err(GenError::NonPositive("f_target"));
    }
    if params.max_edge_len <= 0 {
        return Err(GenError::NonPositive("max_edge_len"));
    }
    if params.max_idle < 0 {
        return Err(GenError::NonPositive("max_idle"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.tree_size;
    let mut edges = Vec::with_capacity(n - 1);
    for v in 1..n as Vertex {
        let parent = rng.gen_range(0..v);
        let len = rng.gen_range(1..=params.max_edge_len);
        edges.push(EdgeSpec::new(parent, v, len));
    }
    let graph = MetricGraph::new((0..n as Vertex).collect(), edges, 0).expect("generated tree");
    let tree = RootedTree::from_graph(graph.clone()).expect("generated tree");

    // only vertices whose round trip fits in one f_target-length trip
    let usable: Vec<Vertex> = graph
        .vertex_ids()
        .iter()
        .copied()
        .filter(|&v| v != 0 && 2 * tree.depth(v).unwrap() <= params.f_target)
        .collect();
    if usable.is_empty() {
        return Err(GenError::NoReachableVertex(params.f_target));
    }

    let cap = match params.capacity {
        Capacity::Finite(c) => c as usize,
        Capacity::Unbounded => 6,
    };
    let mut pending: Vec<(Request, usize, usize, usize)> = Vec::new(); // request, vehicle, trip slot, gen order
    let mut vehicles: Vec<Vec<Trip>> = vec![Vec::new(); params.vehicles];
    let mut order = 0usize;
    for (vid, trips) in vehicles.iter_mut().enumerate() {
        let mut now: i64 = rng.gen_range(0..=params.max_idle);
        while now < params.horizon {
            // sample a vertex multiset that fits in one trip of length f_target
            let count = rng.gen_range(1..=cap.min(4));
            let mut chosen: Vec<Vertex> = Vec::new();
            let mut chosen_set = VertexSet::new();
            for _ in 0..count {
                let v = usable[rng.gen_range(0..usable.len())];
                let mut trial = chosen_set.clone();
                trial.insert(v);
                if 2 * tree.mst(&trial).unwrap() <= params.f_target {
                    chosen.push(v);
                    chosen_set = trial;
                }
            }
            if chosen.is_empty() {
                now += 1;
                continue;
            }
            // Euler walk over the witness subtree, sliced at depot returns
            // into chained trips
            let walk = tree.euler_walk(&chosen_set).unwrap();
            let slices = slice_at_depot(&walk);
            let start = now;
            let mut slice_start = rat(start);
            for slice in slices {
                let slice_len = graph.walk_len(&slice).unwrap();
                let mut served_here: Vec<(Request, usize)> = Vec::new();
                let mut reach = 0;
                let mut prefix: Vec<(Vertex, Length)> = Vec::new();
                for w in slice.windows(2) {
                    reach += graph.edge_len(w[0], w[1]).unwrap();
                    prefix.push((w[1], reach));
                }
                // requests whose vertex is first visited in this slice
                let mut remaining = Vec::new();
                for &v in &chosen {
                    if let Some(&(_, at)) = prefix.iter().find(|&&(w, _)| w == v) {
                        let serve = slice_start.to_integer() + at;
                        let earliest = (serve - params.f_target).max(0);
                        let latest = slice_start.to_integer();
                        let arrival = rng.gen_range(earliest..=latest);
                        served_here.push((
                            Request {
                                arrival,
                                vertex: v,
                            },
                            order,
                        ));
                        order += 1;
                    } else {
                        remaining.push(v);
                    }
                }
                chosen = remaining;
                let trip_slot = trips.len();
                trips.push(Trip {
                    start: slice_start,
                    walk: slice,
                    served: Vec::new(),
                });
                for (req, ord) in served_here {
                    pending.push((req, vid, trip_slot, ord));
                }
                slice_start += rat(slice_len);
            }
            now = slice_start.to_integer() + rng.gen_range(0..=params.max_idle);
        }
    }

    // fix the request ordering (by arrival, ties by generation order), then
    // point the witness trips at the final indices
    pending.sort_by_key(|(req, _, _, ord)| (req.arrival, *ord));
    let mut requests = Vec::with_capacity(pending.len());
    for (id, (req, vid, slot, _)) in pending.iter().enumerate() {
        requests.push(*req);
        vehicles[*vid][*slot].served.push(id);
    }
    for trips in &mut vehicles {
        trips.retain(|t| !t.served.is_empty());
    }
    let inst = Instance::new(graph, params.vehicles, params.capacity, requests)
        .expect("generated instance is valid");
    let witness = Schedule { vehicles };
    Ok((inst, witness))
}

/// Split a depot-anchored Euler walk into depot-to-depot slices with no
/// interior depot visit.
pub fn slice_at_depot(walk: &[Vertex]) -> Vec<Vec<Vertex>> {
    let depot = walk[0];
    let mut slices = Vec::new();
    let mut cur = vec![depot];
    for &v in &walk[1..] {
        cur.push(v);
        if v == depot {
            slices.push(std::mem::replace(&mut cur, vec![depot]));
        }
    }
    slices
}
