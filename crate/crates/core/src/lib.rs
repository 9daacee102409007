//! Reclaim-aware checkpointing, destination selection and migration traffic
//! admission for GPU pools whose owners may take their hardware back at any
//! time, plus a deterministic discrete-event simulator that exercises them.
//!
//! The protocol modules are usable on their own:
//!
//! * [`checkpoint`] sizes checkpoint intervals and splits a shared write
//!   budget across jobs.
//! * [`placement`] picks a migration destination.
//! * [`admission`] admits, rates and staggers migration flows under a
//!   reserved research-traffic floor.
//!
//! [`sim`] wires them together with [`hazard`] models and a campus
//! [`model::Topology`].

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admission;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod hazard;
pub mod io;
pub mod model;
pub mod placement;
pub mod rng;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
