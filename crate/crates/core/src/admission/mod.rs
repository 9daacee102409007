//! Migration traffic control: budgets, admission, rate filling, staggering,
//! token-bucket enforcement and the provider kill-switch.

mod admit;
mod bucket;
mod flow;
mod killswitch;
mod monitor;

pub use admit::{admit, admit_network, max_min_fill, stagger, Admission, NetworkFlow};
pub use bucket::{TokenBucket, Verdict, ENFORCEMENT_QUANTUM_S};
pub use flow::{BandwidthBudget, FlowId, FlowStatus, MigrationFlow, TrafficClass, METADATA_BYTES};
pub use killswitch::{KillMode, KillSwitch, DEFAULT_KILL_LATENCY_S};
pub use monitor::IsolationMonitor;
