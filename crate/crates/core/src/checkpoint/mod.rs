//! Checkpoint interval control.
//!
//! A job checkpointing every `interval` seconds at bandwidth `b` while
//! no-notice departures arrive at rate `lambda` pays, per unit time,
//! `lambda * interval / 2` in expected recompute plus `payload / (b * interval)`
//! in write time. Everything here minimises that cost, alone or summed over
//! jobs that share a write budget.

mod allocation;
mod controller;
mod gap;
mod interval;

pub use allocation::{
    aggregate_cost, cube_root_allocation, cube_root_cost, water_fill_boxed, Allocation, BoxedJob,
};
pub use controller::{adaptive_ckpt_tick, CkptDemand, FinalCkpt, Infeasible, TickJob, TickOutput};
pub use gap::{adaptivity_gap, label_binding, tv_fixed_interval, GapStats};
pub use interval::{
    constrained_interval, final_ckpt_feasible, local_cost, local_interval, local_optimal_cost,
    DEFAULT_WRITE_SHARE,
};
