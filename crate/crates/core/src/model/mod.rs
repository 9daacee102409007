//! Shared domain types: time series, campus topology, jobs and departures.

pub mod bandwidth;
pub mod piecewise;
pub mod topology;
pub mod types;

pub use bandwidth::{bottleneck_bandwidth, migration_time, BandwidthTrace};
pub use piecewise::Piecewise;
pub use topology::{
    generate_campus, BuildingId, CampusParams, Endpoint, Link, LinkId, NodeId, NodeRole, NodeSpec,
    Switch, Tier, Topology,
};
pub use types::{DepartureEvent, DepartureKind, JobId, JobState, SimClock};
