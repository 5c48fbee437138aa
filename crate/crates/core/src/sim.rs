//! Deterministic discrete-event engine for online dispatch, the online
//! algorithm adapters, and the guess-doubling wrapper.
//!
//! The engine owns the clock and the request stream; an algorithm only ever
//! sees arrivals at or before the current time, which enforces the online
//! information contract by construction. Events at equal timestamps are
//! processed arrivals first, then trip completions, then the algorithm's
//! wake; adversary emissions materialize as ordinary arrivals and may depend
//! only on trips that started strictly earlier.

use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::bundling;
use crate::dispatch::{trips_for_group, DispatchError, Job};
use crate::grouping::{binarize, make_groups, BinarizedTree};
use crate::instance::{
    validate, Capacity, FlowReport, Instance, ReqId, Request, Schedule, Trip, ValidationError,
};
use crate::metric::{Length, MetricGraph, RootedTree, Vertex};
use crate::rat::{fmt_rat, rat, Rat};

/// A trip committed by an algorithm. The start may lie in the future (a
/// chained continuation); served requests must already have arrived.
#[derive(Debug, Clone)]
pub struct StartTrip {
    pub vehicle: usize,
    pub trip: Trip,
}

/// What an algorithm can see when it acts.
pub struct ActCtx<'a> {
    pub now: Rat,
    /// Per vehicle, the completion time of its last committed trip.
    pub vehicle_free_at: &'a [Rat],
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgError {
    #[error("window {window}: batch of {size} requests exceeds the exact-mode limit {limit}")]
    BatchTooLarge {
        window: i64,
        size: usize,
        limit: usize,
    },
    #[error(
        "window {window}: no free vehicle for a subtour — F is not a valid bound or an \
         approximation guarantee was exceeded"
    )]
    NoFreeVehicle { window: i64 },
    #[error("window {window}: a subtour would complete after the window deadline")]
    MissesDeadline { window: i64 },
    #[error("{0}")]
    Other(String),
}

/// Online algorithms plug into the engine through this interface. The engine
/// delivers each arrival exactly once, notifies completions, and calls `act`
/// after the events at every time point (including requested wakes).
pub trait OnlineAlgorithm {
    fn on_arrival(&mut self, now: Rat, id: ReqId, req: Request);
    fn on_completion(&mut self, _now: Rat, _vehicle: usize) {}
    /// Next time the algorithm wants to act without any triggering event.
    fn next_wake(&self) -> Option<Rat>;
    fn act(&mut self, ctx: &ActCtx<'_>) -> Result<Vec<StartTrip>, AlgError>;
}

/// Request generators whose emissions may depend on observed trip starts.
/// Emissions are pulled in time order; the engine delivers every trip start
/// strictly before the next emission is produced, and rejects emissions
/// dated before the clock.
pub trait Adversary {
    fn next_emission_time(&self) -> Option<i64>;
    fn emit(&mut self, t: i64) -> Vec<Request>;
    fn observe_trip_start(&mut self, start: Rat, walk: &[Vertex], served: &[(i64, Vertex)]);
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Arrival {
        t: i64,
        id: ReqId,
        vertex: Vertex,
    },
    TripStart {
        t: Rat,
        vehicle: usize,
        len: Length,
        served: Vec<ReqId>,
    },
    Completion {
        t: Rat,
        vehicle: usize,
    },
}

impl std::fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceEvent::Arrival { t, id, vertex } => write!(f, "A {t} {id} {vertex}"),
            TraceEvent::TripStart {
                t,
                vehicle,
                len,
                served,
            } => write!(f, "S {} {vehicle} {len} {served:?}", fmt_rat(*t)),
            TraceEvent::Completion { t, vehicle } => write!(f, "C {} {vehicle}", fmt_rat(*t)),
        }
    }
}

/// A committed trip start, queued for adversary observation.
type Observation = (Rat, Vec<Vertex>, Vec<(i64, Vertex)>);

/// Hex digest of a trace, for reproducibility checks.
pub fn trace_digest(trace: &[TraceEvent]) -> String {
    let mut hasher = Sha256::new();
    for ev in trace {
        hasher.update(ev.to_string().as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// The instance actually played, including adversary-emitted requests.
    pub instance: Instance,
    pub schedule: Schedule,
    pub report: FlowReport,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("algorithm invariant violation: {0}")]
    Algorithm(#[from] AlgError),
    #[error("bad trip committed at {at}: {what}")]
    BadTrip { at: String, what: String },
    #[error("adversary emitted a request dated {emitted} before the clock {clock}")]
    RetroactiveEmission { emitted: i64, clock: String },
    #[error("schedule failed validation: {0}")]
    Validation(#[from] ValidationError),
    #[error("engine made no progress (livelock)")]
    Livelock,
}

/// Run an algorithm online over an instance. Requests from the instance and
/// from the adversary (if any) are revealed at their arrival times only; the
/// resulting schedule is re-validated from scratch before being returned.
pub fn run_online(
    inst: &Instance,
    algo: &mut dyn OnlineAlgorithm,
    speed: Rat,
    mut adversary: Option<&mut dyn Adversary>,
) -> Result<RunOutcome, SimError> {
    let mut requests: Vec<Request> = inst.requests.clone();
    let mut arrivals: Vec<(i64, ReqId)> = requests
        .iter()
        .enumerate()
        .map(|(i, r)| (r.arrival, i))
        .collect();
    arrivals.sort_unstable();
    let mut cursor = 0usize;
    let mut completions: BTreeMap<(Rat, usize, u64), usize> = BTreeMap::new();
    let mut completion_seq = 0u64;
    let mut vehicle_free_at: Vec<Rat> = vec![rat(0); inst.vehicles];
    let mut schedule = Schedule::empty(inst.vehicles);
    let mut served: Vec<bool> = vec![false; requests.len()];
    let mut trace: Vec<TraceEvent> = Vec::new();
    let mut observations: VecDeque<Observation> = VecDeque::new();
    let mut last_t = rat(0);

    let mut guard = 0u64;
    loop {
        guard += 1;
        if guard > 20_000_000 {
            return Err(SimError::Livelock);
        }
        let next_other = [
            arrivals.get(cursor).map(|&(t, _)| rat(t)),
            completions.keys().next().map(|&(t, _, _)| t),
            algo.next_wake(),
        ]
        .into_iter()
        .flatten()
        .min();
        // materialize due adversary emissions before advancing
        if let Some(adv) = adversary.as_deref_mut() {
            if let Some(te) = adv.next_emission_time() {
                if next_other.is_none_or(|t| rat(te) <= t) {
                    if rat(te) < last_t {
                        return Err(SimError::RetroactiveEmission {
                            emitted: te,
                            clock: fmt_rat(last_t),
                        });
                    }
                    // trips that have physically started are observable
                    while observations
                        .front()
                        .is_some_and(|(s, _, _)| *s < rat(te))
                    {
                        let (s, walk, desc) = observations.pop_front().unwrap();
                        adv.observe_trip_start(s, &walk, &desc);
                    }
                    for r in adv.emit(te) {
                        if r.arrival < te {
                            return Err(SimError::RetroactiveEmission {
                                emitted: r.arrival,
                                clock: fmt_rat(rat(te)),
                            });
                        }
                        let id = requests.len();
                        requests.push(r);
                        served.push(false);
                        let pos = arrivals[cursor..]
                            .binary_search(&(r.arrival, id))
                            .unwrap_err();
                        arrivals.insert(cursor + pos, (r.arrival, id));
                    }
                    continue; // recompute candidates with the new arrivals
                }
            }
        }
        let Some(now) = next_other else { break };
        let now = now.max(last_t); // stale wakes clamp to the clock
        last_t = now;

        while cursor < arrivals.len() && rat(arrivals[cursor].0) <= now {
            let (t, id) = arrivals[cursor];
            cursor += 1;
            trace.push(TraceEvent::Arrival {
                t,
                id,
                vertex: requests[id].vertex,
            });
            algo.on_arrival(now, id, requests[id]);
        }
        while let Some((&key, &vehicle)) = completions.iter().next() {
            if key.0 > now {
                break;
            }
            completions.remove(&key);
            trace.push(TraceEvent::Completion { t: key.0, vehicle });
            algo.on_completion(key.0, vehicle);
        }

        let ctx = ActCtx {
            now,
            vehicle_free_at: &vehicle_free_at,
        };
        let trips = algo.act(&ctx)?;
        for StartTrip { vehicle, trip } in trips {
            let at = fmt_rat(now);
            if vehicle >= inst.vehicles {
                return Err(SimError::BadTrip {
                    at,
                    what: format!("vehicle {vehicle} does not exist"),
                });
            }
            if trip.start < now {
                return Err(SimError::BadTrip {
                    at,
                    what: "trip starts in the past".into(),
                });
            }
            if trip.start < vehicle_free_at[vehicle] {
                return Err(SimError::BadTrip {
                    at,
                    what: format!("vehicle {vehicle} is still busy"),
                });
            }
            let len = inst.graph.walk_len(&trip.walk).map_err(|e| SimError::BadTrip {
                at: at.clone(),
                what: e.to_string(),
            })?;
            if !inst.capacity.allows(trip.served.len()) {
                return Err(SimError::BadTrip {
                    at,
                    what: format!("{} served requests exceed capacity", trip.served.len()),
                });
            }
            let mut served_desc = Vec::with_capacity(trip.served.len());
            for &r in &trip.served {
                if r >= requests.len() || rat(requests[r].arrival) > now {
                    return Err(SimError::BadTrip {
                        at: at.clone(),
                        what: format!("request {r} has not arrived"),
                    });
                }
                if served[r] {
                    return Err(SimError::BadTrip {
                        at: at.clone(),
                        what: format!("request {r} already served"),
                    });
                }
                served[r] = true;
                served_desc.push((requests[r].arrival, requests[r].vertex));
            }
            let completion = trip.start + rat(len) / speed;
            vehicle_free_at[vehicle] = completion;
            completions.insert((completion, vehicle, completion_seq), vehicle);
            completion_seq += 1;
            trace.push(TraceEvent::TripStart {
                t: trip.start,
                vehicle,
                len,
                served: trip.served.clone(),
            });
            observations.push_back((trip.start, trip.walk.clone(), served_desc));
            schedule.vehicles[vehicle].push(trip);
        }
    }

    let instance = Instance::new(inst.graph.clone(), inst.vehicles, inst.capacity, requests)
        .expect("engine-extended instance is valid");
    let report = validate(&instance, &schedule, speed)?;
    Ok(RunOutcome {
        instance,
        schedule,
        report,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Tree algorithm (online adapter)
// ---------------------------------------------------------------------------

/// Online driver for the tree-metric algorithm with a given flow-time bound
/// guess `f`: interval bucketing with the left/right split, whole-bundle
/// jobs for one vehicle or per-group jobs for several, dispatched FIFO.
pub struct TreeOnline {
    inst: Instance,
    tree: RootedTree,
    bin: Option<BinarizedTree>,
    f: Length,
    k: usize,
    buckets: BTreeMap<i64, Vec<ReqId>>,
    unbundled: usize,
    prev_right: Vec<ReqId>,
    next_even: i64,
    queue: VecDeque<Job>,
    machine_free: Vec<Rat>,
}

impl TreeOnline {
    pub fn new(inst: &Instance, f: Length) -> Result<Self, DispatchError> {
        if inst.capacity != Capacity::Unbounded {
            return Err(DispatchError::CapacityUnsupported);
        }
        if f <= 0 {
            return Err(DispatchError::Metric(
                crate::metric::MetricError::NonPositiveParam { name: "f", value: f },
            ));
        }
        let tree = inst.tree()?;
        let bin = (inst.vehicles >= 2).then(|| binarize(&tree));
        Ok(TreeOnline {
            inst: inst.clone(),
            tree,
            bin,
            f,
            k: inst.vehicles,
            buckets: BTreeMap::new(),
            unbundled: 0,
            prev_right: Vec::new(),
            next_even: 2,
            queue: VecDeque::new(),
            machine_free: vec![rat(0); inst.vehicles],
        })
    }

    fn bucket(&self, i: i64) -> &[ReqId] {
        self.buckets.get(&i).map_or(&[], |v| v.as_slice())
    }
}

impl OnlineAlgorithm for TreeOnline {
    fn on_arrival(&mut self, _now: Rat, id: ReqId, req: Request) {
        let idx = bundling::IntervalBuckets::bucket_index(req.arrival, self.f);
        self.buckets.entry(idx).or_default().push(id);
        self.unbundled += 1;
    }

    fn next_wake(&self) -> Option<Rat> {
        (self.unbundled > 0).then(|| rat((self.next_even + 1) * self.f))
    }

    fn act(&mut self, ctx: &ActCtx<'_>) -> Result<Vec<StartTrip>, AlgError> {
        while self.unbundled > 0 && ctx.now >= rat((self.next_even + 1) * self.f) {
            let i = self.next_even;
            let (left, right) = match &self.bin {
                None => bundling::split_single(
                    &self.tree,
                    &self.inst,
                    self.bucket(i - 1),
                    self.bucket(i),
                    self.bucket(i + 1),
                ),
                Some(bin) => {
                    let split = bundling::split_multi(
                        bin,
                        &self.inst,
                        self.bucket(i - 1),
                        self.bucket(i),
                        self.bucket(i + 1),
                        self.f,
                        (1, 1),
                    )
                    .map_err(|e| AlgError::Other(e.to_string()))?;
                    (split.left, split.right)
                }
            };
            let mut bundle: Vec<ReqId> = std::mem::take(&mut self.prev_right);
            bundle.extend_from_slice(self.bucket(i - 1));
            bundle.extend_from_slice(&left);
            bundle.sort_unstable();
            self.unbundled -= bundle.len();
            self.prev_right = right;
            self.next_even += 2;
            if bundle.is_empty() {
                continue;
            }
            let release = (i + 1) * self.f;
            match &self.bin {
                None => {
                    let positions = self.inst.positions(&bundle);
                    let size = 2 * self.tree.mst(&positions).expect("bundle in tree");
                    self.queue.push_back(Job {
                        release,
                        size,
                        bundle_index: i - 1,
                        seq: 0,
                        requests: bundle,
                    });
                }
                Some(bin) => {
                    let pairs: Vec<(ReqId, Vertex)> = bundle
                        .iter()
                        .map(|&r| (r, self.inst.requests[r].vertex))
                        .collect();
                    for (seq, group) in make_groups(bin, &pairs, self.f).into_iter().enumerate() {
                        self.queue.push_back(Job {
                            release,
                            size: 2 * group.mst,
                            bundle_index: i - 1,
                            seq,
                            requests: group.requests,
                        });
                    }
                }
            }
        }
        // FIFO dispatch: earliest-released job to the lowest-index idle
        // machine
        let mut out = Vec::new();
        while !self.queue.is_empty() {
            let Some(machine) = (0..self.k).find(|&m| self.machine_free[m] <= ctx.now) else {
                break;
            };
            let job = self.queue.pop_front().expect("queue nonempty");
            debug_assert!(rat(job.release) <= ctx.now);
            let trips = trips_for_group(&self.tree, &self.inst, &job.requests, ctx.now)
                .expect("jobs are nonempty");
            self.machine_free[machine] = ctx.now + rat(job.size);
            out.extend(trips.into_iter().map(|trip| StartTrip {
                vehicle: machine,
                trip,
            }));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// FIFO batching baseline
// ---------------------------------------------------------------------------

/// Naive baseline: whenever a vehicle is idle, serve the up-to-`c` earliest
/// pending requests in arrival order via shortest paths.
pub struct FifoBatchOnline {
    inst: Instance,
    batch: usize,
    pending: VecDeque<(ReqId, Request)>,
    machine_free: Vec<Rat>,
}

impl FifoBatchOnline {
    pub fn new(inst: &Instance) -> Self {
        let batch = match inst.capacity {
            Capacity::Finite(c) => c as usize,
            Capacity::Unbounded => 4,
        };
        FifoBatchOnline {
            inst: inst.clone(),
            batch,
            pending: VecDeque::new(),
            machine_free: vec![rat(0); inst.vehicles],
        }
    }
}

impl OnlineAlgorithm for FifoBatchOnline {
    fn on_arrival(&mut self, _now: Rat, id: ReqId, req: Request) {
        self.pending.push_back((id, req));
    }

    fn next_wake(&self) -> Option<Rat> {
        None
    }

    fn act(&mut self, ctx: &ActCtx<'_>) -> Result<Vec<StartTrip>, AlgError> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            let Some(machine) =
                (0..self.machine_free.len()).find(|&m| self.machine_free[m] <= ctx.now)
            else {
                break;
            };
            let take = self.batch.min(self.pending.len());
            let batch: Vec<(ReqId, Request)> = self.pending.drain(..take).collect();
            let mut stops = vec![self.inst.graph.depot()];
            stops.extend(batch.iter().map(|(_, r)| r.vertex));
            stops.push(self.inst.graph.depot());
            let walk = self
                .inst
                .graph
                .expand_walk(&stops)
                .map_err(|e| AlgError::Other(e.to_string()))?;
            let mut at = ctx.now;
            let mut remaining = batch;
            for slice in crate::instance::slice_at_depot(&walk) {
                let len = self.inst.graph.walk_len(&slice).expect("expanded walk");
                let mut served = Vec::new();
                remaining.retain(|&(id, ref r)| {
                    if slice.contains(&r.vertex) {
                        served.push(id);
                        false
                    } else {
                        true
                    }
                });
                out.push(StartTrip {
                    vehicle: machine,
                    trip: Trip {
                        start: at,
                        walk: slice,
                        served,
                    },
                });
                at += rat(len);
            }
            debug_assert!(remaining.is_empty());
            self.machine_free[machine] = at;
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Guess-doubling wrapper
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoublingState {
    /// Current guess for the optimal maximum flow time.
    pub f: Length,
    /// Cumulative arrival delay: `3β` times the sum of superseded guesses.
    pub d: i64,
    pub stage: usize,
}

/// Wraps an `F`-guessing algorithm into one needing no `F` input. Each stage
/// runs a fresh inner instance on delayed arrivals `r + D`; when some
/// request's delayed flow time is about to exceed `β·F`, or the inner
/// algorithm asks to start a trip longer than `2β·F`, the stage is
/// abandoned: active trips drain, the guess doubles, and `D` grows by `3β`
/// times the superseded guess so every pending request re-arrives after the
/// new stage begins.
pub struct DoublingWrapper<F> {
    factory: F,
    graph: MetricGraph,
    beta: i64,
    state: DoublingState,
    first_instant: Option<i64>,
    stage_start: i64,
    inner: Option<Box<dyn OnlineAlgorithm>>,
    known: BTreeMap<ReqId, Request>,
    fed: BTreeSet<ReqId>,
    serve_at: BTreeMap<ReqId, Rat>,
    draining: bool,
    active_trips: usize,
}

impl<F> DoublingWrapper<F>
where
    F: FnMut(Length) -> Box<dyn OnlineAlgorithm>,
{
    pub fn new(graph: MetricGraph, beta: i64, factory: F) -> Self {
        DoublingWrapper {
            factory,
            graph,
            beta,
            state: DoublingState {
                f: 0,
                d: 0,
                stage: 0,
            },
            first_instant: None,
            stage_start: 0,
            inner: None,
            known: BTreeMap::new(),
            fed: BTreeSet::new(),
            serve_at: BTreeMap::new(),
            draining: false,
            active_trips: 0,
        }
    }

    pub fn state(&self) -> DoublingState {
        self.state
    }

    fn delayed(&self, req: &Request) -> i64 {
        req.arrival + self.state.d
    }

    fn deadline(&self, req: &Request) -> Rat {
        rat(self.delayed(req) + self.beta * self.state.f)
    }

    /// Requests whose delayed flow can still cross `β·F`: unserved ones, and
    /// ones committed to a serve time past their deadline.
    fn flow_pending(&self) -> Vec<(ReqId, Request)> {
        self.known
            .iter()
            .filter(|(id, req)| match self.serve_at.get(id) {
                None => true,
                Some(&s) => s > self.deadline(req),
            })
            .map(|(id, req)| (*id, *req))
            .collect()
    }

    fn start_stage(&mut self, now: i64) {
        self.state.stage += 1;
        self.stage_start = now;
        self.fed.clear();
        self.inner = Some((self.factory)(self.state.f));
    }

    fn switch_stage(&mut self, now: i64) {
        let old = self.state.f;
        self.state.d += 3 * self.beta * old;
        self.state.f = 2 * old;
        self.draining = false;
        self.start_stage(now);
    }

    fn integral(t: Rat) -> i64 {
        debug_assert!(t.is_integer(), "doubling stages run at unit speed");
        t.to_integer()
    }
}

impl<F> OnlineAlgorithm for DoublingWrapper<F>
where
    F: FnMut(Length) -> Box<dyn OnlineAlgorithm>,
{
    fn on_arrival(&mut self, now: Rat, id: ReqId, req: Request) {
        let t = Self::integral(now);
        let depot_dist = self
            .graph
            .distance(self.graph.depot(), req.vertex)
            .expect("request vertex in graph");
        let candidate = if depot_dist > 0 { depot_dist } else { 1 };
        match self.first_instant {
            None => {
                // the initial guess is the smallest nonzero serve time among
                // the requests of the first arrival instant
                self.first_instant = Some(t);
                self.state.f = candidate;
                self.start_stage(t);
            }
            Some(t0) if t == t0 && self.state.stage == 1 && candidate < self.state.f => {
                self.state.f = candidate;
                self.fed.clear();
                self.inner = Some((self.factory)(self.state.f));
            }
            _ => {}
        }
        self.known.insert(id, req);
    }

    fn on_completion(&mut self, now: Rat, vehicle: usize) {
        self.active_trips -= 1;
        if let Some(inner) = self.inner.as_deref_mut() {
            inner.on_completion(now - rat(self.stage_start), vehicle);
        }
    }

    fn next_wake(&self) -> Option<Rat> {
        if self.first_instant.is_none() || self.draining {
            return None; // arrivals and completions drive those phases
        }
        let mut wake: Option<Rat> = None;
        let mut push = |t: Rat| {
            wake = Some(match wake {
                None => t,
                Some(w) => w.min(t),
            })
        };
        if let Some(inner) = self.inner.as_deref() {
            if let Some(w) = inner.next_wake() {
                push(w + rat(self.stage_start));
            }
        }
        for (id, req) in self.flow_pending() {
            if !self.fed.contains(&id) {
                push(rat(self.delayed(&req)));
            }
            push(self.deadline(&req));
        }
        wake
    }

    fn act(&mut self, ctx: &ActCtx<'_>) -> Result<Vec<StartTrip>, AlgError> {
        if self.first_instant.is_none() {
            return Ok(Vec::new());
        }
        if self.draining {
            if self.active_trips > 0 {
                return Ok(Vec::new());
            }
            self.switch_stage(Self::integral(ctx.now));
        }
        // flow-time trigger
        if self
            .flow_pending()
            .iter()
            .any(|(_, req)| ctx.now >= self.deadline(req))
        {
            self.inner = None;
            self.draining = true;
            if self.active_trips > 0 {
                return Ok(Vec::new());
            }
            self.switch_stage(Self::integral(ctx.now));
        }
        // feed delayed arrivals that are due
        let due: Vec<(ReqId, Request)> = self
            .known
            .iter()
            .filter(|(id, req)| {
                !self.fed.contains(id)
                    && !self.serve_at.contains_key(id)
                    && rat(self.delayed(req)) <= ctx.now
            })
            .map(|(id, req)| (*id, *req))
            .collect();
        let inner_now = ctx.now - rat(self.stage_start);
        for (id, req) in due {
            self.fed.insert(id);
            let shifted = Request {
                arrival: self.delayed(&req) - self.stage_start,
                vertex: req.vertex,
            };
            self.inner
                .as_deref_mut()
                .expect("stage is live")
                .on_arrival(inner_now, id, shifted);
        }
        let shifted_free: Vec<Rat> = ctx
            .vehicle_free_at
            .iter()
            .map(|&t| (t - rat(self.stage_start)).max(rat(0)))
            .collect();
        let inner_ctx = ActCtx {
            now: inner_now,
            vehicle_free_at: &shifted_free,
        };
        let proposed = self
            .inner
            .as_deref_mut()
            .expect("stage is live")
            .act(&inner_ctx)?;
        // oversized trip: abandon the stage instead of starting it
        let limit = 2 * self.beta * self.state.f;
        let oversized = proposed
            .iter()
            .any(|st| self.graph.walk_len(&st.trip.walk).expect("inner trip walk") > limit);
        if oversized {
            self.inner = None;
            self.draining = true;
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(proposed.len());
        for st in proposed {
            let mut trip = st.trip;
            trip.start += rat(self.stage_start);
            // record committed serve times (unit speed) for the flow trigger
            let mut reach = trip.start;
            let mut first_visit: Vec<(Vertex, Rat)> = vec![(trip.walk[0], reach)];
            for w in trip.walk.windows(2) {
                reach += rat(self.graph.edge_len(w[0], w[1]).expect("walk edge"));
                if !first_visit.iter().any(|&(v, _)| v == w[1]) {
                    first_visit.push((w[1], reach));
                }
            }
            for &id in &trip.served {
                let v = self.known[&id].vertex;
                let t = first_visit
                    .iter()
                    .find(|&&(w, _)| w == v)
                    .map(|&(_, t)| t)
                    .expect("served vertex on walk");
                self.serve_at.insert(id, t);
            }
            self.active_trips += 1;
            out.push(StartTrip {
                vehicle: st.vehicle,
                trip,
            });
        }
        Ok(out)
    }
}
