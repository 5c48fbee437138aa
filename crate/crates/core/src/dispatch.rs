//! Jobs, FIFO machine scheduling, and the realization of bundle/group jobs
//! as depot-to-depot trips.
//!
//! A bundle (single vehicle) or group (multiple vehicles) becomes a job of
//! size twice its subtree weight, released when the bundle is. Jobs are
//! scheduled non-preemptively on `k` identical machines by FIFO: whenever a
//! machine idles and released jobs are waiting, it takes the one released
//! earliest. A job is realized as the depth-first Euler walk of its subtree,
//! sliced at depot returns into back-to-back trips whose lengths sum to the
//! job size.

use crate::instance::{Instance, ReqId, Trip};
use crate::metric::{Length, MetricError, RootedTree};
use crate::rat::{rat, Rat};
use crate::sim::RunOutcome;

/// A released unit of work: serve `requests` in one contiguous run of trips
/// of total length `size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub release: i64,
    pub size: Length,
    /// Odd index of the originating bundle.
    pub bundle_index: i64,
    /// Creation order within the bundle (0 for a whole-bundle job).
    pub seq: usize,
    pub requests: Vec<ReqId>,
}

/// FIFO on `k` identical machines. `jobs` must be ordered by the FIFO key
/// (nondecreasing release; ties in the caller's priority order). Returns the
/// machine and start time per job: each job starts the moment a machine is
/// free and its release has passed, ties between machines by index.
pub fn fifo_schedule(jobs: &[(i64, i64)], k: usize) -> Vec<(usize, i64)> {
    assert!(k >= 1);
    assert!(
        jobs.windows(2).all(|w| w[0].0 <= w[1].0),
        "jobs must arrive in nondecreasing release order"
    );
    let mut free = vec![0i64; k];
    let mut out = Vec::with_capacity(jobs.len());
    for &(release, size) in jobs {
        debug_assert!(size >= 0);
        let machine = (0..k)
            .min_by_key(|&m| (free[m].max(release), m))
            .expect("k >= 1");
        let start = free[machine].max(release);
        free[machine] = start + size;
        out.push((machine, start));
    }
    out
}

/// Maximum flow time (completion minus release) of a FIFO schedule.
pub fn fifo_max_flow(jobs: &[(i64, i64)], k: usize) -> i64 {
    fifo_schedule(jobs, k)
        .iter()
        .zip(jobs)
        .map(|(&(_, start), &(release, size))| start + size - release)
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispatchError {
    #[error("cannot build a trip for an empty group")]
    EmptyGroup,
    #[error("the tree algorithm requires unbounded capacity")]
    CapacityUnsupported,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Sim(Box<crate::sim::SimError>),
}

impl From<crate::sim::SimError> for DispatchError {
    fn from(e: crate::sim::SimError) -> Self {
        DispatchError::Sim(Box::new(e))
    }
}

/// Realize a group as trips: the Euler walk of the subtree spanning the
/// depot and the group's positions, visiting children in ascending id order,
/// sliced at depot returns into chained trips starting at `start`. Every
/// request is served at the first visit of its vertex; the trip lengths sum
/// to twice the group's subtree weight.
pub fn trips_for_group(
    tree: &RootedTree,
    inst: &Instance,
    requests: &[ReqId],
    start: Rat,
) -> Result<Vec<Trip>, DispatchError> {
    if requests.is_empty() {
        return Err(DispatchError::EmptyGroup);
    }
    let positions = inst.positions(requests);
    let walk = tree.euler_walk(&positions)?;
    let slices = crate::instance::slice_at_depot(&walk);
    let mut remaining: Vec<ReqId> = requests.to_vec();
    let mut trips = Vec::with_capacity(slices.len());
    let mut at = start;
    for slice in slices {
        let len = tree.graph().walk_len(&slice)?;
        let mut served = Vec::new();
        remaining.retain(|&r| {
            let hit = slice.contains(&inst.requests[r].vertex);
            if hit {
                served.push(r);
            }
            !hit
        });
        served.sort_unstable();
        trips.push(Trip {
            start: at,
            walk: slice,
            served,
        });
        at += rat(len);
    }
    debug_assert!(remaining.is_empty());
    Ok(trips)
}

/// End-to-end tree algorithm: bucketize, split, group (for `k >= 2`), FIFO.
/// Runs online through the simulation engine; `f` must upper-bound the
/// offline optimum for the flow guarantees to hold.
pub fn run_tree_algorithm(inst: &Instance, f: Length) -> Result<RunOutcome, DispatchError> {
    let mut algo = crate::sim::TreeOnline::new(inst, f)?;
    Ok(crate::sim::run_online(inst, &mut algo, rat(1), None)?)
}
