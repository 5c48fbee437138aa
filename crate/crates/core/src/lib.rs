//! Online depot-dispatch simulation for the maximum-flow-time objective.
//!
//! The crate models a depot with `k` capacity-`c` vehicles serving requests
//! that arrive over time at the vertices of a weighted graph. It provides:
//!
//! - [`metric`]: weighted graphs, rooted trees and the anchored-subtree /
//!   trip-cost quantities the algorithms rely on;
//! - [`instance`]: requests, schedules, flow-time validation, document
//!   serialization and seeded feasible-instance generation;
//! - [`bundling`], [`grouping`], [`dispatch`]: the online tree-metric
//!   algorithm (interval bundling, bundle grouping, FIFO dispatch);
//! - [`speeding`]: the windowed batching algorithm for general metrics under
//!   speed augmentation, plus the TSP/CVRP tour builders it needs;
//! - [`oracle`]: exact offline optima and certified lower bounds for tiny
//!   instances;
//! - [`adversary`]: generators for the adversarial instance families, with
//!   structural certificates;
//! - [`sim`]: the deterministic discrete-event engine, online algorithm
//!   adapters, and the guess-doubling wrapper.

pub mod adversary;
pub mod bundling;
pub mod dispatch;
pub mod grouping;
pub mod instance;
pub mod metric;
pub mod oracle;
pub mod rat;
pub mod sim;
pub mod speeding;

pub use instance::{Capacity, FlowReport, Instance, Request, Schedule, Trip};
pub use metric::{Anchor, EdgeSpec, Length, MetricGraph, RootedTree, Vertex, VertexSet};
pub use rat::{rat, ratio, Rat};
