use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JobId, NodeId};
use crate::units::KIB;

/// Size of the notification sent for a no-notice reclaim.
pub const METADATA_BYTES: f64 = 4.0 * KIB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u64);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Priority classes, highest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficClass {
    Emergency,
    Planned,
    Presync,
    Background,
}

impl TrafficClass {
    /// DSCP codepoint used as a label in outputs.
    pub fn dscp(self) -> u8 {
        match self {
            TrafficClass::Emergency => 46,
            TrafficClass::Planned => 34,
            TrafficClass::Presync => 8,
            TrafficClass::Background => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Emergency => "emergency",
            TrafficClass::Planned => "planned",
            TrafficClass::Presync => "presync",
            TrafficClass::Background => "background",
        }
    }
}

impl FromStr for TrafficClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "emergency" => Ok(TrafficClass::Emergency),
            "planned" => Ok(TrafficClass::Planned),
            "presync" => Ok(TrafficClass::Presync),
            "background" => Ok(TrafficClass::Background),
            other => Err(Error::Parse(format!("unknown traffic class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Pending,
    Admitted,
    Degraded,
    Completed,
    Killed,
}

impl FlowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowStatus::Pending => "pending",
            FlowStatus::Admitted => "admitted",
            FlowStatus::Degraded => "degraded",
            FlowStatus::Completed => "completed",
            FlowStatus::Killed => "killed",
        }
    }
}

/// A checkpoint transfer competing for migration bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationFlow {
    pub id: FlowId,
    pub job: JobId,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: f64,
    /// Notice left at `arrival_s`.
    pub notice_s: f64,
    pub restart_s: f64,
    pub class: TrafficClass,
    pub min_rate: f64,
    pub assigned_rate: f64,
    pub start_offset_s: f64,
    pub status: FlowStatus,
    pub arrival_s: f64,
    /// Highest rate the path can carry.
    pub path_cap: f64,
}

impl MigrationFlow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: FlowId,
        job: JobId,
        src: NodeId,
        dst: NodeId,
        payload: f64,
        notice_s: f64,
        restart_s: f64,
        class: TrafficClass,
        arrival_s: f64,
    ) -> Self {
        let mut f = Self {
            id,
            job,
            src,
            dst,
            payload,
            notice_s,
            restart_s,
            class,
            min_rate: 0.0,
            assigned_rate: 0.0,
            start_offset_s: 0.0,
            status: FlowStatus::Pending,
            arrival_s,
            path_cap: f64::INFINITY,
        };
        f.min_rate = f.required_rate();
        f
    }

    /// `payload / (notice - restart)`, or infinity when the notice cannot
    /// even cover the restart.
    pub fn required_rate(&self) -> f64 {
        let slack = self.notice_s - self.restart_s;
        if slack > 0.0 {
            self.payload / slack
        } else {
            f64::INFINITY
        }
    }

    /// Absolute deadline used for earliest-deadline-first ordering.
    pub fn deadline(&self) -> f64 {
        self.arrival_s + self.notice_s
    }

    pub fn has_deadline_slack(&self) -> bool {
        self.notice_s > self.restart_s
    }
}

/// Split of one link's capacity into research reserve and migration share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthBudget {
    pub total: f64,
    pub reserved: f64,
    pub migration: f64,
    pub floor: f64,
    pub beta: f64,
}

impl BandwidthBudget {
    pub fn new(total: f64, floor: f64, beta: f64) -> Result<Self> {
        if !(total >= 0.0) {
            return Err(Error::OutOfRange { what: "total bandwidth", value: total });
        }
        if !(floor >= 0.0) {
            return Err(Error::OutOfRange { what: "B_min", value: floor });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::OutOfRange { what: "beta", value: beta });
        }
        let reserved = (beta * total).max(floor);
        Ok(Self { total, reserved, migration: (total - reserved).max(0.0), floor, beta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_split() {
        let b = BandwidthBudget::new(10.0, 3.0, 0.3).unwrap();
        assert_eq!((b.reserved, b.migration), (3.0, 7.0));
        let b = BandwidthBudget::new(100.0, 3.0, 0.3).unwrap();
        assert_eq!((b.reserved, b.migration), (30.0, 70.0));
        let b = BandwidthBudget::new(2.0, 3.0, 0.3).unwrap();
        assert_eq!(b.migration, 0.0);
        assert!(BandwidthBudget::new(10.0, 3.0, 1.3).is_err());
    }

    #[test]
    fn min_rate_and_labels() {
        let f = MigrationFlow::new(FlowId(1), JobId(0), NodeId(0), NodeId(1), 100.0, 60.0, 10.0, TrafficClass::Planned, 5.0);
        assert_eq!(f.min_rate, 2.0);
        assert_eq!(f.deadline(), 65.0);
        let g = MigrationFlow::new(FlowId(2), JobId(0), NodeId(0), NodeId(1), 100.0, 10.0, 10.0, TrafficClass::Planned, 0.0);
        assert!(g.min_rate.is_infinite());
        assert_eq!(TrafficClass::Planned.dscp(), 34);
        assert_eq!("presync".parse::<TrafficClass>().unwrap(), TrafficClass::Presync);
        assert!("bulk".parse::<TrafficClass>().is_err());
    }
}
