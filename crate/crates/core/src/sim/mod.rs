//! Discrete-event simulation of a volatile GPU pool.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod network;
pub mod oracle;
pub mod queue;
pub mod report;
pub mod scenario;
pub mod strategy;
pub mod sweep;

pub use config::{
    stress_scenario, BandwidthConfig, ExperimentConfig, HazardConfig, JobMix, Knobs, OutputPaths, Policy, ScenarioConfig,
    Verbosity,
};
pub use engine::{run, run_scenario};
pub use network::{weighted_fill, Demand};
pub use queue::{Event, EventQueue};
pub use report::{median, percentile, EventRecord, SimReport};
pub use scenario::{JobSpec, Scenario};
pub use strategy::{CkptMode, Strategy};
pub use oracle::{oracle_tiny, random_tiny, replay, TinyEvent, TinyInstance, TinyJob, TinyOutcome};
pub use sweep::{bootstrap_mean, sweep, SweepGrid, SweepRow, SweepTable};
