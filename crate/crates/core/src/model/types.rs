use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u32);

/// A running GPU job as seen by the controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct JobState {
    pub id: JobId,
    pub payload_bytes: f64,
    pub loss_budget_s: f64,
    pub remaining_runtime_s: f64,
    pub restart_time_s: f64,
    pub host: NodeId,
    pub last_completed_ckpt_time: f64,
    /// Flow id of the checkpoint transfer in progress, if any.
    pub ckpt_in_flight: Option<u64>,
    pub vram_bytes: f64,
    pub min_cuda: f64,
}

impl JobState {
    pub fn new(
        id: JobId,
        payload_bytes: f64,
        loss_budget_s: f64,
        restart_time_s: f64,
        host: NodeId,
    ) -> Result<Self> {
        if !(payload_bytes > 0.0) {
            return Err(Error::NonPositive { what: "payload_bytes", value: payload_bytes });
        }
        if !(loss_budget_s > 0.0) {
            return Err(Error::NonPositive { what: "loss_budget_s", value: loss_budget_s });
        }
        if !(restart_time_s >= 0.0) {
            return Err(Error::OutOfRange { what: "restart_time_s", value: restart_time_s });
        }
        Ok(Self {
            id,
            payload_bytes,
            loss_budget_s,
            remaining_runtime_s: f64::INFINITY,
            restart_time_s,
            host,
            last_completed_ckpt_time: 0.0,
            ckpt_in_flight: None,
            vram_bytes: 0.0,
            min_cuda: 0.0,
        })
    }
}

/// Monotone simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    now_s: f64,
    pub epoch_len_s: f64,
}

impl SimClock {
    pub fn new(epoch_len_s: f64) -> Self {
        Self { now_s: 0.0, epoch_len_s }
    }

    pub fn now(&self) -> f64 {
        self.now_s
    }

    /// Moves the clock forward. Panics on a backwards step, which would mean
    /// the event queue is broken.
    pub fn advance_to(&mut self, t: f64) {
        assert!(t >= self.now_s, "clock moved backwards: {} -> {t}", self.now_s);
        self.now_s = t;
    }

    pub fn epoch_index(&self) -> u64 {
        (self.now_s / self.epoch_len_s).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepartureKind {
    Scheduled,
    Emergency,
}

/// A provider reclaim. `time_s` is when the signal arrives; the hardware
/// leaves at `time_s + notice_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepartureEvent {
    pub node: NodeId,
    pub time_s: f64,
    pub kind: DepartureKind,
    pub notice_s: f64,
}

impl DepartureEvent {
    pub fn emergency(node: NodeId, time_s: f64) -> Self {
        Self { node, time_s, kind: DepartureKind::Emergency, notice_s: 0.0 }
    }

    pub fn scheduled(node: NodeId, time_s: f64, notice_s: f64, tau_min_s: f64) -> Result<Self> {
        if !(notice_s >= tau_min_s && notice_s > 0.0) {
            return Err(Error::OutOfRange { what: "notice_s", value: notice_s });
        }
        Ok(Self { node, time_s, kind: DepartureKind::Scheduled, notice_s })
    }

    pub fn is_emergency(&self) -> bool {
        self.kind == DepartureKind::Emergency
    }

    pub fn withdrawal_time(&self) -> f64 {
        self.time_s + self.notice_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn departure_invariants() {
        let e = DepartureEvent::emergency(NodeId(1), 5.0);
        assert!(e.is_emergency());
        assert_eq!(e.notice_s, 0.0);
        assert!(DepartureEvent::scheduled(NodeId(1), 5.0, 9.0, 10.0).is_err());
        assert!(DepartureEvent::scheduled(NodeId(1), 5.0, 0.0, 0.0).is_err());
        let s = DepartureEvent::scheduled(NodeId(1), 5.0, 60.0, 10.0).unwrap();
        assert_eq!(s.withdrawal_time(), 65.0);
    }

    #[test]
    fn job_validation() {
        assert!(JobState::new(JobId(0), 0.0, 1.0, 0.0, NodeId(0)).is_err());
        assert!(JobState::new(JobId(0), 1.0, 0.0, 0.0, NodeId(0)).is_err());
        assert!(JobState::new(JobId(0), 1.0, 1.0, -1.0, NodeId(0)).is_err());
        assert!(JobState::new(JobId(0), 1.0, 1.0, 0.0, NodeId(0)).is_ok());
    }

    #[test]
    #[should_panic]
    fn clock_is_monotone() {
        let mut c = SimClock::new(600.0);
        c.advance_to(10.0);
        c.advance_to(5.0);
    }
}
