//! Run results and the per-event log.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::sim::config::Policy;

/// One row of the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t_s: f64,
    pub event: &'static str,
    pub job: Option<u32>,
    pub node: Option<u32>,
    pub detail: String,
}

/// Aggregates of one run. Counts come straight from the event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub policy: Policy,
    pub seed: u64,
    pub horizon_s: f64,
    /// Rollback, restart after rollback and blocking checkpoint time.
    pub work_loss_gpu_h: f64,
    /// The rollback and restart part alone; equals the sum of `loss` records.
    pub rollback_gpu_h: f64,
    pub downtime_median_s: f64,
    pub downtime_p99_s: f64,
    pub migration_success_pct: f64,
    pub traffic_degradation_pct: f64,
    pub gpu_utilization_pct: f64,
    pub useful_gpu_h: f64,
    pub overhead_gpu_h: f64,
    pub downtime_gpu_h: f64,
    pub departures: u64,
    pub emergency_reclaims: u64,
    pub scheduled_reclaims: u64,
    pub zero_loss_handoffs: u64,
    pub checkpoints: u64,
    pub admitted_flows: u64,
    pub degraded_flows: u64,
    pub unsustained_flows: u64,
    pub deadline_violations: u64,
    pub isolation_violations: u64,
    pub infeasible_intervals: u64,
    /// Largest per-job gap in the time-accounting identity, seconds.
    pub conservation_error_s: f64,
    #[serde(skip)]
    pub downtimes_s: Vec<f64>,
    #[serde(skip)]
    pub log: Vec<EventRecord>,
}

impl SimReport {
    /// True when a hard guarantee was broken during the run.
    pub fn invariant_violated(&self) -> bool {
        self.deadline_violations > 0 || self.isolation_violations > 0 || self.conservation_error_s > 1e-6
    }

    pub fn write_csv<W: Write>(reports: &[SimReport], w: W) -> Result<()> {
        let mut w = crate::io::csv_writer(w)?;
        for r in reports {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Newline-delimited `t_s,event,job_id,node_id,detail` records.
    pub fn write_log<W: Write>(&self, w: W) -> Result<()> {
        let mut w = crate::io::csv_writer(w)?;
        w.write_record(["t_s", "event", "job_id", "node_id", "detail"])?;
        for e in &self.log {
            let job = e.job.map(|j| j.to_string()).unwrap_or_default();
            let node = e.node.map(|n| n.to_string()).unwrap_or_default();
            w.write_record([e.t_s.to_string().as_str(), e.event, &job, &node, &e.detail])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nearest-rank percentile of unsorted samples; zero when empty.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * s.len() as f64).ceil().max(1.0) as usize;
    s[rank.min(s.len()) - 1]
}

pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
