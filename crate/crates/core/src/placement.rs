//! Destination selection for a migrating job.
//!
//! Candidates are filtered on hardware, load and the notice deadline, same
//! building candidates are preferred when there are enough of them, and the
//! survivors are ranked by transfer time plus a penalty for the chance that
//! the destination itself leaves before the job finishes.

use crate::error::Result;
use crate::hazard::HazardTrace;
use crate::model::{bottleneck_bandwidth, migration_time, BandwidthTrace, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectParams {
    /// Weight of the re-migration penalty.
    pub alpha: f64,
    /// Minimum same-building candidates before remote ones are dropped.
    pub k_min: usize,
    /// Highest load a destination may carry.
    pub theta_load: f64,
}

impl Default for SelectParams {
    fn default() -> Self {
        Self { alpha: 1.0, k_min: 2, theta_load: 0.8 }
    }
}

/// A job that must leave `src`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrationRequest {
    pub src: NodeId,
    pub payload: f64,
    pub restart_s: f64,
    pub vram_bytes: f64,
    pub min_cuda: f64,
    pub remaining_runtime_s: f64,
    /// Notice left before the source disappears; `None` for proactive moves.
    pub notice_s: Option<f64>,
    pub t: f64,
}

/// Live state the selector reads besides the static topology.
pub struct SelectView<'a> {
    pub topo: &'a Topology,
    /// Bandwidth as currently measured.
    pub bandwidth: &'a BandwidthTrace,
    /// Hazard per node, indexed by node id.
    pub hazards: &'a [HazardTrace],
    /// Current load per node; `None` uses the static load in the topology.
    pub loads: Option<&'a [f64]>,
    /// Nodes currently able to take work; `None` means all.
    pub online: Option<&'a [bool]>,
}

impl SelectView<'_> {
    fn load(&self, n: NodeId) -> f64 {
        match self.loads {
            Some(l) => l[n.0 as usize],
            None => self.topo.nodes()[n.0 as usize].load,
        }
    }

    fn online(&self, n: NodeId) -> bool {
        self.online.is_none_or(|o| o[n.0 as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Survival {
    pub probability: f64,
    /// The horizon ran past the end of the hazard trace and the last rate
    /// was held.
    pub extrapolated: bool,
}

/// Probability the node stays for `horizon_s` from `t`.
pub fn survival_probability(hazard: &HazardTrace, t: f64, horizon_s: f64) -> Survival {
    let (cum, extrapolated) = hazard.cumulative(t, t + horizon_s.max(0.0));
    Survival { probability: (-cum).exp(), extrapolated }
}

/// Average transfer-plus-restart time from `d` to each node in `others`
/// (excluding `d`). Zero when there are no others.
pub fn mean_onward_migration(
    topo: &Topology,
    bandwidth: &BandwidthTrace,
    d: NodeId,
    others: &[NodeId],
    payload: f64,
    restart_s: f64,
    t: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &o in others.iter().filter(|&&o| o != d) {
        let bw = bottleneck_bandwidth(topo, bandwidth, d, o, t)?;
        sum += migration_time(payload, bw, restart_s)?;
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub dest: NodeId,
    pub t_mig_s: f64,
    pub survival: f64,
    pub score_s: f64,
    /// Passed every filter including the deadline.
    pub feasible: bool,
    pub same_building: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Every hardware-compatible candidate, scored, by node id.
    pub table: Vec<CandidateScore>,
    pub winner: Option<NodeId>,
}

impl Selection {
    pub fn winner_score(&self) -> Option<&CandidateScore> {
        self.winner.and_then(|w| self.table.iter().find(|c| c.dest == w))
    }
}

/// Nodes other than the source that meet the hardware and load filters.
pub fn compatible_candidates(view: &SelectView<'_>, req: &MigrationRequest, theta_load: f64) -> Vec<NodeId> {
    view.topo
        .providers()
        .filter(|n| {
            n.id != req.src
                && view.online(n.id)
                && n.vram_bytes >= req.vram_bytes
                && n.cuda_capability >= req.min_cuda
                && view.load(n.id) <= theta_load
        })
        .map(|n| n.id)
        .collect()
}

/// Picks a destination or returns a selection without a winner when no
/// candidate passes the filters.
pub fn topo_select(view: &SelectView<'_>, req: &MigrationRequest, params: &SelectParams) -> Result<Selection> {
    let compatible = compatible_candidates(view, req, params.theta_load);
    let mut table = Vec::with_capacity(compatible.len());
    for &d in &compatible {
        let bw = bottleneck_bandwidth(view.topo, view.bandwidth, req.src, d, req.t)?;
        let t_mig_s = migration_time(req.payload, bw, req.restart_s)?;
        let feasible = req.notice_s.is_none_or(|tau| t_mig_s <= tau);
        let node = view.topo.node(d)?;
        let survival = survival_probability(
            &view.hazards[node.hazard_profile as usize],
            req.t,
            req.remaining_runtime_s,
        )
        .probability;
        let onward =
            mean_onward_migration(view.topo, view.bandwidth, d, &compatible, req.payload, req.restart_s, req.t)?;
        table.push(CandidateScore {
            dest: d,
            t_mig_s,
            survival,
            score_s: t_mig_s + params.alpha * (1.0 - survival) * onward,
            feasible,
            same_building: view.topo.same_building(req.src, d),
        });
    }
    let feasible: Vec<&CandidateScore> = table.iter().filter(|c| c.feasible).collect();
    let local: Vec<&CandidateScore> = feasible.iter().copied().filter(|c| c.same_building).collect();
    let pool = if local.len() >= params.k_min { local } else { feasible };
    // strict < keeps the lowest id among equal scores
    let mut winner: Option<&CandidateScore> = None;
    for c in pool {
        if winner.is_none_or(|w| c.score_s < w.score_s) {
            winner = Some(c);
        }
    }
    let winner = winner.map(|c| c.dest);
    Ok(Selection { table, winner })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalityReport {
    /// Local bottlenecks dominate cross-building ones and the best local
    /// transfer is no slower than the best remote one.
    Holds { best_local_s: f64, best_cross_s: f64 },
    /// Separation holds but the conclusion failed.
    Violated { best_local_s: f64, best_cross_s: f64 },
    /// Separation does not hold at `t`, or one side has no candidates.
    NotApplicable { local_min_bw: f64, cross_max_bw: f64 },
}

/// Checks that the best same-building transfer from `s` is no slower than
/// the best cross-building one whenever every local bottleneck is at least
/// every cross-building bottleneck.
pub fn locality_dominance_check(
    topo: &Topology,
    bandwidth: &BandwidthTrace,
    s: NodeId,
    t: f64,
    payload: f64,
    restart_s: f64,
) -> Result<LocalityReport> {
    let mut local_min_bw = f64::INFINITY;
    let mut cross_max_bw = 0.0f64;
    let mut best_local_s = f64::INFINITY;
    let mut best_cross_s = f64::INFINITY;
    for n in topo.providers().filter(|n| n.id != s) {
        let bw = bottleneck_bandwidth(topo, bandwidth, s, n.id, t)?;
        let tm = migration_time(payload, bw, restart_s)?;
        if topo.same_building(s, n.id) {
            local_min_bw = local_min_bw.min(bw);
            best_local_s = best_local_s.min(tm);
        } else {
            cross_max_bw = cross_max_bw.max(bw);
            best_cross_s = best_cross_s.min(tm);
        }
    }
    if !best_local_s.is_finite() || !best_cross_s.is_finite() || local_min_bw < cross_max_bw {
        return Ok(LocalityReport::NotApplicable { local_min_bw, cross_max_bw });
    }
    Ok(if best_local_s <= best_cross_s {
        LocalityReport::Holds { best_local_s, best_cross_s }
    } else {
        LocalityReport::Violated { best_local_s, best_cross_s }
    })
}
