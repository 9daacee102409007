use crate::admission::flow::{FlowStatus, MigrationFlow};
use crate::model::NodeId;

pub const DEFAULT_KILL_LATENCY_S: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KillMode {
    /// Hardware leaves now; transfers into the node are cut.
    Emergency,
    /// Scheduled reclaim or grace period; transfers already running finish.
    ScheduledOrGrace,
}

/// Provider-side switch that stops the node from taking new work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KillSwitch {
    pub node: NodeId,
    pub activated_at: f64,
    pub latency_s: f64,
    pub mode: KillMode,
}

impl KillSwitch {
    pub fn new(node: NodeId, activated_at: f64, mode: KillMode) -> Self {
        Self { node, activated_at, latency_s: DEFAULT_KILL_LATENCY_S, mode }
    }

    pub fn effective_at(&self) -> f64 {
        self.activated_at + self.latency_s
    }

    /// Whether a new inbound flow arriving at `t` is still let through.
    pub fn accepts_new_flow(&self, t: f64) -> bool {
        t < self.effective_at()
    }

    /// Applies the switch to flows in flight. Returns ids of flows killed.
    pub fn apply(&self, inflight: &mut [MigrationFlow]) -> Vec<crate::admission::FlowId> {
        let mut killed = Vec::new();
        if self.mode == KillMode::Emergency {
            for f in inflight.iter_mut() {
                if f.dst == self.node && f.status == FlowStatus::Admitted {
                    f.status = FlowStatus::Killed;
                    f.assigned_rate = 0.0;
                    killed.push(f.id);
                }
            }
        }
        killed
    }
}
