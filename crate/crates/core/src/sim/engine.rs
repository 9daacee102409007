//! The event loop.
//!
//! Transfers are fluid: between two events every active flow moves at a
//! constant rate, and rates are recomputed after each event. Checkpoints are
//! blocking writes to the building store; a handoff is a direct transfer to
//! the destination; recovery restores the last stored checkpoint.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use crate::admission::{admit_network, FlowId, IsolationMonitor, MigrationFlow, NetworkFlow, TrafficClass};
use crate::checkpoint::{adaptive_ckpt_tick, TickJob};
use crate::error::{Error, Result};
use crate::hazard::{estimate_bandwidth_series, estimate_hazard_pooled, poisson_upper, HazardTrace};
use crate::model::{BuildingId, DepartureEvent, DepartureKind, JobId, NodeId, Piecewise, Tier};
use crate::placement::{compatible_candidates, topo_select, MigrationRequest, SelectParams, SelectView};
use crate::rng::{label, stream, Rng};
use crate::sim::config::ScenarioConfig;
use crate::sim::network::{weighted_fill, Demand};
use crate::sim::queue::{Event, EventQueue};
use crate::sim::report::{median, percentile, EventRecord, SimReport};
use crate::sim::scenario::{JobSpec, Scenario};
use crate::sim::strategy::{CkptMode, Strategy};

/// Builds the scenario for `cfg` and runs it.
pub fn run(cfg: &ScenarioConfig) -> Result<SimReport> {
    let sc = Scenario::build(cfg)?;
    run_scenario(cfg, &sc)
}

/// Runs `cfg.policy` on a prebuilt scenario, so several policies can share
/// one world.
pub fn run_scenario(cfg: &ScenarioConfig, sc: &Scenario) -> Result<SimReport> {
    let strat = Strategy::for_policy(cfg.policy, &cfg.knobs)?;
    Engine::new(cfg, sc, strat)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeState {
    Online,
    Leaving { withdraw_at: f64 },
    Away,
}

#[derive(Debug, Clone)]
struct NodeRt {
    state: NodeState,
    used: u32,
    away_since: f64,
    /// Closed absence intervals.
    away: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Running,
    Checkpointing,
    Migrating,
    Restoring,
    Restarting,
    Queued,
    WaitingReturn(NodeId),
}

#[derive(Debug, Clone, Copy)]
struct Episode {
    stopped: Option<f64>,
    scheduled: bool,
    rolled_back: bool,
}

#[derive(Debug, Clone)]
struct JobRt {
    spec: JobSpec,
    host: Option<NodeId>,
    phase: Phase,
    since: f64,
    progress: f64,
    saved: f64,
    saved_building: BuildingId,
    snapshot: f64,
    flow: Option<u64>,
    pending: Option<u64>,
    interval: f64,
    last_ckpt_end: f64,
    ckpt_gen: u64,
    restart_gen: u64,
    running: f64,
    overhead: f64,
    downtime: f64,
    lost: f64,
    episode: Option<Episode>,
}

#[derive(Debug, Clone, Copy)]
struct Pooled {
    emergency_hat: f64,
    emergency_upper: f64,
    all_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FlowKind {
    Checkpoint,
    Migration,
    Restore,
}

#[derive(Debug, Clone)]
struct FlowRt {
    job: JobId,
    kind: FlowKind,
    src: NodeId,
    dst: NodeId,
    links: Vec<usize>,
    remaining: f64,
    rate: f64,
    cap: f64,
    active: bool,
    admitted: bool,
    reserved: f64,
    deadline: f64,
    sustained: bool,
    degraded_logged: bool,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    sc: &'a Scenario,
    strat: Strategy,
    now: f64,
    queue: EventQueue,
    nodes: Vec<NodeRt>,
    jobs: Vec<JobRt>,
    flows: BTreeMap<u64, FlowRt>,
    next_flow: u64,
    observed: Vec<DepartureEvent>,
    est_hazards: Vec<HazardTrace>,
    rng_dst: Rng,
    rng_ret: Vec<Rng>,
    capacity: Vec<f64>,
    access: Vec<bool>,
    b_mig: Vec<f64>,
    research: Vec<f64>,
    served: Vec<f64>,
    mig_active: Vec<bool>,
    monitors: Vec<IsolationMonitor>,
    degr_ref: f64,
    degr_served: f64,
    log: Vec<EventRecord>,
    downtimes: Vec<f64>,
    loss_total: f64,
    restart_loss: f64,
    departures: u64,
    emergency_reclaims: u64,
    scheduled_reclaims: u64,
    zero_loss_handoffs: u64,
    checkpoints: u64,
    admitted_flows: u64,
    degraded_flows: u64,
    unsustained_flows: u64,
    deadline_violations: u64,
    infeasible_intervals: u64,
}

const TINY: f64 = 1e-9;

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig, sc: &'a Scenario, strat: Strategy) -> Result<Self> {
        let topo = &sc.topo;
        let k = &cfg.knobs;
        let capacity: Vec<f64> = topo.links().iter().map(|l| l.capacity_bytes_per_s).collect();
        let access: Vec<bool> = topo.links().iter().map(|l| l.tier == Tier::Access).collect();
        let b_mig: Vec<f64> = capacity
            .iter()
            .map(|&c| (c - (k.beta_p3 * c).max(k.b_min_bytes_per_s)).max(0.0))
            .collect();
        let monitors = capacity
            .iter()
            .map(|&c| IsolationMonitor::new(c, (k.beta_p3 * c).max(k.b_min_bytes_per_s)))
            .collect();
        let nodes = topo
            .nodes()
            .iter()
            .map(|_| NodeRt { state: NodeState::Online, used: 0, away_since: 0.0, away: Vec::new() })
            .collect();
        let rng_ret = topo.nodes().iter().map(|n| stream(cfg.seed, label::RETURNS, n.id.0 as u64)).collect();
        let nl = capacity.len();
        let mut e = Engine {
            cfg,
            sc,
            strat,
            now: 0.0,
            queue: EventQueue::new(),
            nodes,
            jobs: Vec::new(),
            flows: BTreeMap::new(),
            next_flow: 0,
            observed: Vec::new(),
            est_hazards: Vec::new(),
            rng_dst: stream(cfg.seed, label::RANDOM_DST, 0),
            rng_ret,
            capacity,
            access,
            b_mig,
            research: vec![0.0; nl],
            served: vec![0.0; nl],
            mig_active: vec![false; nl],
            monitors,
            degr_ref: 0.0,
            degr_served: 0.0,
            log: Vec::new(),
            downtimes: Vec::new(),
            loss_total: 0.0,
            restart_loss: 0.0,
            departures: 0,
            emergency_reclaims: 0,
            scheduled_reclaims: 0,
            zero_loss_handoffs: 0,
            checkpoints: 0,
            admitted_flows: 0,
            degraded_flows: 0,
            unsustained_flows: 0,
            deadline_violations: 0,
            infeasible_intervals: 0,
        };
        e.refresh_hazard_view(cfg.generator.mean_lambda)?;
        e.place_initial();
        let horizon = cfg.horizon_s;
        for d in &sc.departures {
            if d.time_s < horizon {
                let notice_s = (!d.is_emergency()).then_some(d.notice_s);
                e.queue.push(d.time_s, Event::Departure { node: d.node, notice_s });
            }
        }
        if let Some((_, s)) = sc.bandwidth.iter().next() {
            for &b in s.breakpoints() {
                if b > 0.0 && b < horizon {
                    e.queue.push(b, Event::RateChange);
                }
            }
        }
        e.queue.push(0.0, Event::ControllerTick);
        e.queue.push(horizon, Event::End);
        Ok(e)
    }

    fn record(&mut self, event: &'static str, job: Option<JobId>, node: Option<NodeId>, detail: String) {
        self.log.push(EventRecord { t_s: self.now, event, job: job.map(|j| j.0), node: node.map(|n| n.0), detail });
    }

    fn place_initial(&mut self) {
        let mut rng = stream(self.cfg.seed, label::JOBS, 1);
        for spec in self.sc.jobs.clone() {
            let cands: Vec<NodeId> = self
                .sc
                .topo
                .providers()
                .filter(|n| {
                    self.nodes[n.id.0 as usize].used < n.gpu_slots
                        && n.vram_bytes >= spec.vram_bytes
                        && n.cuda_capability >= spec.min_cuda
                })
                .map(|n| n.id)
                .collect();
            let host = (!cands.is_empty()).then(|| cands[rng.random_range(0..cands.len())]);
            let building = host
                .map(|h| self.sc.topo.nodes()[h.0 as usize].building)
                .unwrap_or(self.sc.topo.buildings()[0]);
            if let Some(h) = host {
                self.nodes[h.0 as usize].used += 1;
            }
            let fixed = match self.strat.ckpt {
                CkptMode::Fixed(i) | CkptMode::Local(i) => i,
                _ => 2.0 * spec.loss_budget_s,
            };
            self.jobs.push(JobRt {
                host,
                phase: if host.is_some() { Phase::Running } else { Phase::Queued },
                since: 0.0,
                progress: 0.0,
                saved: 0.0,
                saved_building: building,
                snapshot: 0.0,
                flow: None,
                pending: None,
                interval: fixed,
                last_ckpt_end: 0.0,
                ckpt_gen: 0,
                restart_gen: 0,
                running: 0.0,
                overhead: 0.0,
                downtime: 0.0,
                lost: 0.0,
                episode: None,
                spec,
            });
        }
        for j in 0..self.jobs.len() {
            match self.jobs[j].host {
                Some(h) => {
                    let id = self.jobs[j].spec.id;
                    self.record("place", Some(id), Some(h), String::new());
                    self.schedule_ckpt(j);
                }
                None => {
                    let id = self.jobs[j].spec.id;
                    self.record("queued", Some(id), None, String::new());
                }
            }
        }
    }

    fn write_speed(&self, n: NodeId) -> f64 {
        self.sc.topo.nodes()[n.0 as usize].write_speed_bytes_per_s
    }

    fn building(&self, n: NodeId) -> BuildingId {
        self.sc.topo.nodes()[n.0 as usize].building
    }

    fn avail(&self, l: usize) -> f64 {
        self.sc.bandwidth.iter().nth(l).map(|(_, s)| s.value_at_or_last(self.now).0).unwrap_or(0.0)
    }

    fn series(&self, l: usize) -> &Piecewise {
        self.sc.bandwidth.iter().nth(l).expect("link series").1
    }

    // ---- time accounting ----

    fn settle(&mut self, j: usize) {
        let job = &mut self.jobs[j];
        let dt = self.now - job.since;
        match job.phase {
            Phase::Running => {
                job.running += dt;
                job.progress += dt;
            }
            Phase::Checkpointing => job.overhead += dt,
            _ => job.downtime += dt,
        }
        job.since = self.now;
    }

    fn set_phase(&mut self, j: usize, phase: Phase) {
        self.settle(j);
        let now = self.now;
        let job = &mut self.jobs[j];
        job.phase = phase;
        if !matches!(phase, Phase::Running | Phase::Checkpointing) {
            if let Some(ep) = &mut job.episode {
                ep.stopped.get_or_insert(now);
            }
        }
    }

    fn schedule_ckpt(&mut self, j: usize) {
        let job = &mut self.jobs[j];
        if job.phase != Phase::Running || job.flow.is_some() {
            return;
        }
        let due = (job.last_ckpt_end + job.interval).max(self.now);
        job.ckpt_gen += 1;
        let ev = Event::CheckpointDue { job: job.spec.id, generation: job.ckpt_gen };
        self.queue.push(due, ev);
    }

    // ---- flows ----

    fn new_flow(&mut self, j: usize, kind: FlowKind, src: NodeId, dst: NodeId, cap: f64, deadline: f64) -> Result<u64> {
        let links = if src == dst {
            Vec::new()
        } else {
            self.sc.topo.path(src, dst)?.iter().map(|l| l.0 as usize).collect()
        };
        let id = self.next_flow;
        self.next_flow += 1;
        self.flows.insert(
            id,
            FlowRt {
                job: self.jobs[j].spec.id,
                kind,
                src,
                dst,
                links,
                remaining: self.jobs[j].spec.payload,
                rate: 0.0,
                cap,
                active: true,
                admitted: false,
                reserved: 0.0,
                deadline,
                sustained: true,
                degraded_logged: false,
            },
        );
        Ok(id)
    }

    /// Sets every active flow's rate. With shaping, handoffs and restores
    /// form the rate-limited migration class, filled in priority tiers inside
    /// its share; checkpoint writes and research traffic then split what is
    /// left. Without shaping everything shares one weighted fill.
    fn recompute(&mut self) {
        let nl = self.capacity.len();
        let avail: Vec<f64> = (0..nl).map(|l| self.avail(l)).collect();
        for l in 0..nl {
            self.research[l] = if self.access[l] { (self.capacity[l] - avail[l]).max(0.0) } else { 0.0 };
        }
        let ids: Vec<u64> = self.flows.iter().filter(|(_, f)| f.active).map(|(id, _)| *id).collect();
        for id in &ids {
            self.flows.get_mut(id).unwrap().rate = 0.0;
        }
        let shaped = self.strat.shaped;
        let classified = |f: &FlowRt| shaped && f.kind != FlowKind::Checkpoint;
        let mut class_used = vec![0.0; nl];
        if shaped {
            self.fill_migration_class(&ids, &avail);
            for id in &ids {
                let f = &self.flows[id];
                if classified(f) {
                    for &l in &f.links {
                        class_used[l] += f.rate;
                    }
                }
            }
            for l in 0..nl {
                if self.access[l] {
                    self.monitors[l].record(class_used[l], 0.0);
                }
            }
        }

        let open: Vec<u64> = ids.iter().copied().filter(|id| !classified(&self.flows[id])).collect();
        let w = self.cfg.knobs.transfer_weight;
        let mut demands: Vec<Demand> = open
            .iter()
            .map(|id| {
                let f = &self.flows[id];
                Demand::new(f.links.clone(), w, f.cap)
            })
            .collect();
        let research_links: Vec<usize> = (0..nl).filter(|&l| self.access[l] && self.research[l] > 0.0).collect();
        for &l in &research_links {
            demands.push(Demand::new(vec![l], 1.0, self.research[l]));
        }
        let cap: Vec<f64> = (0..nl)
            .map(|l| {
                let total = if self.access[l] { self.capacity[l] } else { avail[l] };
                (total - class_used[l]).max(0.0)
            })
            .collect();
        let rates = weighted_fill(&demands, &cap);
        for (id, r) in open.iter().zip(&rates) {
            self.flows.get_mut(id).unwrap().rate = *r;
        }
        self.served.iter_mut().for_each(|v| *v = 0.0);
        for (k, &l) in research_links.iter().enumerate() {
            self.served[l] = rates[open.len() + k];
        }

        self.mig_active.iter_mut().for_each(|v| *v = false);
        for id in &ids {
            let f = &self.flows[id];
            if f.kind == FlowKind::Migration {
                for &l in &f.links {
                    if self.access[l] {
                        self.mig_active[l] = true;
                    }
                }
            }
        }
    }

    /// Migration-class tiers: admitted reservations (scaled down, and marked
    /// unsustained, if a link can no longer carry them), admitted surplus,
    /// then restores and refused handoffs best effort.
    fn fill_migration_class(&mut self, ids: &[u64], avail: &[f64]) {
        let nl = self.capacity.len();
        let mut residual: Vec<f64> =
            (0..nl).map(|l| if self.access[l] { self.b_mig[l] } else { avail[l] }).collect();
        let mut reserved = vec![0.0; nl];
        for id in ids {
            let f = &self.flows[id];
            if f.admitted {
                for &l in &f.links {
                    reserved[l] += f.reserved;
                }
            }
        }
        let scale: Vec<f64> = (0..nl)
            .map(|l| if reserved[l] > residual[l] * (1.0 + TINY) { residual[l] / reserved[l] } else { 1.0 })
            .collect();
        for id in ids {
            let f = self.flows.get_mut(id).unwrap();
            if f.admitted {
                let s = f.links.iter().map(|&l| scale[l]).fold(1.0, f64::min);
                f.rate = f.reserved * s;
                if s < 1.0 - 1e-9 && f.sustained {
                    f.sustained = false;
                    self.unsustained_flows += 1;
                }
                for &l in &f.links {
                    residual[l] = (residual[l] - f.rate).max(0.0);
                }
            }
        }
        let tiers: [&dyn Fn(&FlowRt) -> bool; 2] = [
            &|f| f.kind == FlowKind::Migration && f.admitted,
            &|f| f.kind == FlowKind::Restore || (f.kind == FlowKind::Migration && !f.admitted),
        ];
        for tier in tiers {
            let members: Vec<u64> = ids.iter().copied().filter(|id| tier(&self.flows[id])).collect();
            let demands: Vec<Demand> = members
                .iter()
                .map(|id| {
                    let f = &self.flows[id];
                    Demand::new(f.links.clone(), 1.0, (f.cap - f.rate).max(0.0))
                })
                .collect();
            let extra = weighted_fill(&demands, &residual);
            for (id, x) in members.iter().zip(extra) {
                let f = self.flows.get_mut(id).unwrap();
                f.rate += x;
                for &l in &f.links {
                    residual[l] = (residual[l] - x).max(0.0);
                }
            }
        }
    }

    fn advance(&mut self, to: f64) {
        let dt = to - self.now;
        if dt > 0.0 {
            for f in self.flows.values_mut().filter(|f| f.active) {
                f.remaining = (f.remaining - f.rate * dt).max(0.0);
            }
            for l in 0..self.capacity.len() {
                if self.mig_active[l] {
                    self.degr_ref += self.research[l] * dt;
                    self.degr_served += self.served[l] * dt;
                }
            }
            self.now = to;
        }
    }

    fn next_completion(&self) -> Option<(f64, u64)> {
        let mut best: Option<(f64, u64)> = None;
        for (id, f) in &self.flows {
            if !f.active {
                continue;
            }
            let t = if f.remaining <= TINY * f.remaining.max(1.0) {
                self.now
            } else if f.rate > 0.0 {
                self.now + f.remaining / f.rate
            } else {
                continue;
            };
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, *id));
            }
        }
        best
    }

    // ---- main loop ----

    fn run(mut self) -> Result<SimReport> {
        self.recompute();
        loop {
            let th = self.queue.peek_time().unwrap_or(f64::INFINITY);
            if let Some((tf, id)) = self.next_completion() {
                if tf < th {
                    self.advance(tf);
                    self.complete(id)?;
                    self.recompute();
                    continue;
                }
            }
            let Some((t, ev)) = self.queue.pop() else { break };
            self.advance(t);
            if ev == Event::End {
                break;
            }
            self.handle(ev)?;
            self.recompute();
        }
        Ok(self.finish())
    }

    fn handle(&mut self, ev: Event) -> Result<()> {
        match ev {
            Event::Departure { node, notice_s } => self.on_departure(node, notice_s),
            Event::Withdrawal { node } => {
                if matches!(self.nodes[node.0 as usize].state, NodeState::Leaving { .. }) {
                    self.withdraw(node)?;
                }
                Ok(())
            }
            Event::NodeReturn { node } => self.on_return(node),
            Event::ControllerTick => self.on_tick(),
            Event::CheckpointDue { job, generation } => self.on_ckpt_due(job.0 as usize, generation),
            Event::RestartDone { job, generation } => self.on_restart_done(job.0 as usize, generation),
            Event::RateChange => Ok(()),
            Event::End => Ok(()),
        }
    }

    fn hosted(&self, n: NodeId) -> Vec<usize> {
        (0..self.jobs.len()).filter(|&j| self.jobs[j].host == Some(n)).collect()
    }

    fn on_departure(&mut self, node: NodeId, notice_s: Option<f64>) -> Result<()> {
        let n = node.0 as usize;
        if self.nodes[n].state != NodeState::Online {
            return Ok(());
        }
        self.departures += 1;
        let (kind, detail) = match notice_s {
            None => (DepartureKind::Emergency, "emergency".to_string()),
            Some(tau) => (DepartureKind::Scheduled, format!("notice={tau}")),
        };
        self.observed.push(DepartureEvent { node, time_s: self.now, kind, notice_s: notice_s.unwrap_or(0.0) });
        self.record("departure", None, Some(node), detail);
        match notice_s {
            None => self.withdraw(node),
            Some(tau) => {
                let withdraw_at = self.now + tau;
                self.nodes[n].state = NodeState::Leaving { withdraw_at };
                self.queue.push(withdraw_at, Event::Withdrawal { node });
                for j in self.hosted(node) {
                    if matches!(self.jobs[j].phase, Phase::Running | Phase::Checkpointing) {
                        self.begin_handoff(j)?;
                    }
                }
                Ok(())
            }
        }
    }

    fn cancel_flow(&mut self, id: u64) -> Option<FlowRt> {
        self.flows.remove(&id)
    }

    fn begin_handoff(&mut self, j: usize) -> Result<()> {
        let host = self.jobs[j].host.expect("hosted job");
        let NodeState::Leaving { withdraw_at } = self.nodes[host.0 as usize].state else {
            return Ok(());
        };
        if self.jobs[j].phase == Phase::Checkpointing {
            if let Some(id) = self.jobs[j].flow.take() {
                self.cancel_flow(id);
            }
            self.set_phase(j, Phase::Running);
        }
        if self.jobs[j].episode.is_none() {
            self.jobs[j].episode = Some(Episode { stopped: None, scheduled: true, rolled_back: false });
            self.scheduled_reclaims += 1;
        }
        if !self.strat.migrate {
            return Ok(());
        }
        let id = self.jobs[j].spec.id;
        let Some(dst) = self.pick_destination(host, j, Some(withdraw_at - self.now))? else {
            self.record("no_destination", Some(id), Some(host), String::new());
            return Ok(());
        };
        self.nodes[dst.0 as usize].used += 1;
        let cap = self.write_speed(host).min(self.write_speed(dst));
        let fid = self.new_flow(j, FlowKind::Migration, host, dst, cap, withdraw_at)?;
        if self.strat.shaped {
            self.flows.get_mut(&fid).unwrap().active = false;
            self.jobs[j].pending = Some(fid);
            self.record("handoff_request", Some(id), Some(dst), String::new());
            self.admission_round()?;
        } else {
            self.start_migration(j, fid);
        }
        Ok(())
    }

    fn start_migration(&mut self, j: usize, fid: u64) {
        self.settle(j);
        self.jobs[j].pending = None;
        self.jobs[j].flow = Some(fid);
        self.jobs[j].snapshot = self.jobs[j].progress;
        self.set_phase(j, Phase::Migrating);
        let (id, dst) = (self.jobs[j].spec.id, self.flows[&fid].dst);
        self.record("handoff_start", Some(id), Some(dst), String::new());
    }

    fn select_view_data(&self) -> (Vec<f64>, Vec<bool>) {
        let topo = &self.sc.topo;
        let loads = topo
            .nodes()
            .iter()
            .map(|n| if n.is_provider() { self.nodes[n.id.0 as usize].used as f64 / n.gpu_slots as f64 } else { 1.0 })
            .collect();
        let online = topo.nodes().iter().map(|n| self.nodes[n.id.0 as usize].state == NodeState::Online).collect();
        (loads, online)
    }

    fn pick_destination(&mut self, src: NodeId, j: usize, notice_s: Option<f64>) -> Result<Option<NodeId>> {
        let (loads, online) = self.select_view_data();
        let view = SelectView {
            topo: &self.sc.topo,
            bandwidth: &self.sc.bandwidth,
            hazards: &self.est_hazards,
            loads: Some(&loads),
            online: Some(&online),
        };
        let spec = &self.jobs[j].spec;
        let req = MigrationRequest {
            src,
            payload: spec.payload,
            restart_s: spec.restart_s,
            vram_bytes: spec.vram_bytes,
            min_cuda: spec.min_cuda,
            remaining_runtime_s: self.cfg.jobs.remaining_runtime_s,
            notice_s,
            t: self.now,
        };
        let k = &self.cfg.knobs;
        if self.strat.topo_aware {
            let params = SelectParams { alpha: k.alpha, k_min: k.k_min, theta_load: k.theta_load };
            let sel = topo_select(&view, &req, &params)?;
            if sel.winner.is_some() {
                return Ok(sel.winner);
            }
            // Nothing meets the deadline: best effort on the fastest transfer.
            let mut best: Option<(f64, NodeId)> = None;
            for c in &sel.table {
                if best.is_none_or(|(t, _)| c.t_mig_s < t) {
                    best = Some((c.t_mig_s, c.dest));
                }
            }
            Ok(best.map(|b| b.1))
        } else {
            let cands = compatible_candidates(&view, &req, k.theta_load);
            if cands.is_empty() {
                return Ok(None);
            }
            let i = self.rng_dst.random_range(0..cands.len());
            Ok(Some(cands[i]))
        }
    }

    /// Planned-flow admission over per-link budgets: the migration share of
    /// access links and the lower bandwidth bound elsewhere.
    fn admission_round(&mut self) -> Result<()> {
        if !self.strat.shaped {
            return Ok(());
        }
        let pending: Vec<u64> = self
            .flows
            .iter()
            .filter(|(_, f)| !f.admitted && f.kind == FlowKind::Migration)
            .map(|(id, _)| *id)
            .collect();
        if pending.is_empty() {
            return Ok(());
        }
        let nl = self.capacity.len();
        let window = self.cfg.knobs.bandwidth_window_s;
        let bucket = self.cfg.generator.bucket_s;
        let mut budget = vec![0.0; nl];
        for (l, b) in budget.iter_mut().enumerate() {
            *b = if self.access[l] {
                self.b_mig[l]
            } else {
                estimate_bandwidth_series(self.series(l), self.now, window, bucket)?.b_lower
            };
        }
        let mut residual = budget.clone();
        for f in self.flows.values().filter(|f| f.active && f.admitted) {
            for &l in &f.links {
                residual[l] = (residual[l] - f.reserved).max(0.0);
            }
        }
        let nfs: Vec<NetworkFlow> = pending
            .iter()
            .map(|id| {
                let f = &self.flows[id];
                let spec = &self.jobs[f.job.0 as usize].spec;
                let mut mf = MigrationFlow::new(
                    FlowId(*id),
                    f.job,
                    f.src,
                    f.dst,
                    f.remaining,
                    f.deadline - self.now,
                    spec.restart_s,
                    TrafficClass::Planned,
                    self.now,
                );
                mf.path_cap = f.links.iter().map(|&l| budget[l]).fold(f.cap, f64::min);
                NetworkFlow { flow: mf, links: f.links.clone() }
            })
            .collect();
        let adm = admit_network(&nfs, &residual, self.now);
        for mf in adm.admitted {
            let id = mf.id.0;
            let j = mf.job.0 as usize;
            let was_active = {
                let f = self.flows.get_mut(&id).unwrap();
                f.admitted = true;
                f.reserved = mf.min_rate;
                std::mem::replace(&mut f.active, true)
            };
            self.admitted_flows += 1;
            self.record("admitted", Some(mf.job), Some(mf.dst), format!("min_rate={}", mf.min_rate));
            if !was_active {
                self.start_migration(j, id);
            }
        }
        // Refused flows still move, best effort, below every reservation.
        for mf in adm.degraded {
            let f = self.flows.get_mut(&mf.id.0).unwrap();
            if !f.degraded_logged {
                f.degraded_logged = true;
                f.active = true;
                self.degraded_flows += 1;
                self.record("degraded", Some(mf.job), Some(mf.dst), String::new());
                self.start_migration(mf.job.0 as usize, mf.id.0);
            }
        }
        Ok(())
    }

    fn release_slot(&mut self, n: NodeId) {
        let node = &mut self.nodes[n.0 as usize];
        if node.state != NodeState::Away {
            node.used = node.used.saturating_sub(1);
        }
    }

    fn withdraw(&mut self, node: NodeId) -> Result<()> {
        let n = node.0 as usize;
        self.record("withdrawal", None, Some(node), String::new());
        let gap = Exp::new(1.0 / self.cfg.hazard.return_mean_s).map_err(|e| Error::Parse(e.to_string()))?;
        let back = self.now + gap.sample(&mut self.rng_ret[n]);
        self.queue.push(back, Event::NodeReturn { node });

        let touching: Vec<u64> =
            self.flows.iter().filter(|(_, f)| f.src == node || f.dst == node).map(|(id, _)| *id).collect();
        let mut rehandoff = Vec::new();
        let mut replace = Vec::new();
        for id in touching {
            let f = self.cancel_flow(id).unwrap();
            let j = f.job.0 as usize;
            if self.jobs[j].flow == Some(id) {
                self.jobs[j].flow = None;
            }
            if self.jobs[j].pending == Some(id) {
                self.jobs[j].pending = None;
            }
            match f.kind {
                FlowKind::Checkpoint => {}
                FlowKind::Migration if f.src == node => self.release_slot(f.dst),
                FlowKind::Migration => {
                    // Destination vanished mid-transfer; the source still
                    // holds the job.
                    self.record("handoff_killed", Some(f.job), Some(node), String::new());
                    if self.jobs[j].phase == Phase::Migrating {
                        self.set_phase(j, Phase::Running);
                    }
                    rehandoff.push(j);
                }
                FlowKind::Restore => {
                    self.record("restore_killed", Some(f.job), Some(node), String::new());
                    replace.push(j);
                }
            }
        }
        self.nodes[n].state = NodeState::Away;
        self.nodes[n].away_since = self.now;
        self.nodes[n].used = 0;
        for j in self.hosted(node) {
            if replace.contains(&j) {
                continue;
            }
            self.recover(j, node)?;
        }
        for j in replace {
            self.jobs[j].host = None;
            self.place_recovery(j)?;
        }
        for j in rehandoff {
            self.begin_handoff(j)?;
        }
        self.admission_round()
    }

    /// The job lost its host: roll back to the last stored checkpoint and
    /// restore it elsewhere (or wait for the node when jobs never move).
    fn recover(&mut self, j: usize, node: NodeId) -> Result<()> {
        self.settle(j);
        let id = self.jobs[j].spec.id;
        if self.jobs[j].episode.is_none() {
            self.jobs[j].episode = Some(Episode { stopped: None, scheduled: false, rolled_back: false });
            self.emergency_reclaims += 1;
        } else if self.jobs[j].episode.is_some_and(|e| e.scheduled && !e.rolled_back) {
            self.record("handoff_failed", Some(id), Some(node), String::new());
        }
        if let Some(ep) = &mut self.jobs[j].episode {
            ep.rolled_back = true;
        }
        let loss = self.jobs[j].progress - self.jobs[j].saved;
        if loss > 0.0 {
            self.jobs[j].lost += loss;
            self.jobs[j].progress = self.jobs[j].saved;
            self.loss_total += loss;
            self.record("loss", Some(id), Some(node), format!("{loss}"));
        }
        self.jobs[j].host = None;
        self.jobs[j].restart_gen += 1;
        if self.strat.migrate {
            self.place_recovery(j)
        } else {
            self.set_phase(j, Phase::WaitingReturn(node));
            Ok(())
        }
    }

    fn place_recovery(&mut self, j: usize) -> Result<()> {
        let store = self.sc.topo.store_of(self.jobs[j].saved_building).expect("store per building");
        let id = self.jobs[j].spec.id;
        match self.pick_destination(store, j, None)? {
            None => {
                if self.jobs[j].phase != Phase::Queued {
                    self.set_phase(j, Phase::Queued);
                    self.record("queued", Some(id), None, String::new());
                }
            }
            Some(d) => {
                self.nodes[d.0 as usize].used += 1;
                self.jobs[j].host = Some(d);
                let fid = self.new_flow(j, FlowKind::Restore, store, d, self.write_speed(d), f64::INFINITY)?;
                self.jobs[j].flow = Some(fid);
                self.set_phase(j, Phase::Restoring);
                self.record("restore_start", Some(id), Some(d), String::new());
            }
        }
        Ok(())
    }

    fn place_queued(&mut self) -> Result<()> {
        for j in 0..self.jobs.len() {
            if self.jobs[j].phase == Phase::Queued {
                self.place_recovery(j)?;
            }
        }
        Ok(())
    }

    fn on_return(&mut self, node: NodeId) -> Result<()> {
        let n = node.0 as usize;
        let since = self.nodes[n].away_since;
        self.nodes[n].away.push((since, self.now));
        self.nodes[n].state = NodeState::Online;
        self.nodes[n].used = 0;
        self.record("return", None, Some(node), String::new());
        let slots = self.sc.topo.nodes()[n].gpu_slots;
        for j in 0..self.jobs.len() {
            if self.jobs[j].phase == Phase::WaitingReturn(node) && self.nodes[n].used < slots {
                self.nodes[n].used += 1;
                self.jobs[j].host = Some(node);
                self.begin_restart(j);
            }
        }
        self.place_queued()
    }

    fn begin_restart(&mut self, j: usize) {
        self.set_phase(j, Phase::Restarting);
        if self.jobs[j].episode.is_some_and(|e| e.rolled_back) {
            // Recompute after a rollback pays the restart again.
            let (id, r) = (self.jobs[j].spec.id, self.jobs[j].spec.restart_s);
            self.restart_loss += r;
            self.loss_total += r;
            self.record("loss", Some(id), self.jobs[j].host, format!("{r}"));
        }
        self.jobs[j].restart_gen += 1;
        let ev = Event::RestartDone { job: self.jobs[j].spec.id, generation: self.jobs[j].restart_gen };
        self.queue.push(self.now + self.jobs[j].spec.restart_s, ev);
    }

    fn on_restart_done(&mut self, j: usize, generation: u64) -> Result<()> {
        if self.jobs[j].restart_gen != generation || self.jobs[j].phase != Phase::Restarting {
            return Ok(());
        }
        self.set_phase(j, Phase::Running);
        self.jobs[j].last_ckpt_end = self.now;
        let id = self.jobs[j].spec.id;
        let host = self.jobs[j].host;
        if let Some(ep) = self.jobs[j].episode.take() {
            let d = self.now - ep.stopped.unwrap_or(self.now);
            self.downtimes.push(d);
            self.record("resume", Some(id), host, format!("{d}"));
        } else {
            self.record("resume", Some(id), host, String::new());
        }
        self.schedule_ckpt(j);
        if let Some(h) = host {
            if matches!(self.nodes[h.0 as usize].state, NodeState::Leaving { .. }) {
                self.begin_handoff(j)?;
            }
        }
        Ok(())
    }

    fn on_ckpt_due(&mut self, j: usize, generation: u64) -> Result<()> {
        let job = &self.jobs[j];
        if job.ckpt_gen != generation || job.phase != Phase::Running || job.pending.is_some() || job.flow.is_some() {
            return Ok(());
        }
        let host = job.host.expect("running job has a host");
        if matches!(self.nodes[host.0 as usize].state, NodeState::Leaving { .. }) {
            return Ok(());
        }
        let dst = match self.strat.ckpt {
            CkptMode::Local(_) => host,
            _ => self.sc.topo.store_of(self.building(host)).expect("store"),
        };
        let cap = self.write_speed(host);
        self.settle(j);
        self.jobs[j].snapshot = self.jobs[j].progress;
        let fid = self.new_flow(j, FlowKind::Checkpoint, host, dst, cap, f64::INFINITY)?;
        self.jobs[j].flow = Some(fid);
        self.set_phase(j, Phase::Checkpointing);
        let id = self.jobs[j].spec.id;
        self.record("ckpt_start", Some(id), Some(host), String::new());
        Ok(())
    }

    fn complete(&mut self, fid: u64) -> Result<()> {
        let f = self.cancel_flow(fid).expect("completing flow exists");
        let j = f.job.0 as usize;
        self.jobs[j].flow = None;
        match f.kind {
            FlowKind::Checkpoint => {
                self.settle(j);
                let job = &mut self.jobs[j];
                job.saved = job.snapshot;
                if f.src != f.dst {
                    job.saved_building = self.sc.topo.nodes()[f.src.0 as usize].building;
                }
                job.last_ckpt_end = self.now;
                self.checkpoints += 1;
                self.set_phase(j, Phase::Running);
                self.record("ckpt_done", Some(f.job), Some(f.src), String::new());
                self.schedule_ckpt(j);
                if matches!(self.nodes[f.src.0 as usize].state, NodeState::Leaving { .. }) {
                    self.begin_handoff(j)?;
                }
            }
            FlowKind::Migration => {
                self.release_slot(f.src);
                let job = &mut self.jobs[j];
                job.host = Some(f.dst);
                job.saved = job.snapshot;
                job.saved_building = self.sc.topo.nodes()[f.dst.0 as usize].building;
                self.zero_loss_handoffs += 1;
                self.record("handoff_done", Some(f.job), Some(f.dst), String::new());
                let restart = self.jobs[j].spec.restart_s;
                if f.admitted && f.sustained && self.now + restart > f.deadline + 1e-6 {
                    self.deadline_violations += 1;
                    self.record("deadline_violation", Some(f.job), Some(f.dst), String::new());
                }
                self.begin_restart(j);
                self.admission_round()?;
            }
            FlowKind::Restore => {
                self.record("restore_done", Some(f.job), Some(f.dst), String::new());
                self.begin_restart(j);
                self.admission_round()?;
            }
        }
        Ok(())
    }

    // ---- controller ----

    fn exposure(&self, from: f64) -> f64 {
        let mut total = 0.0;
        for n in self.sc.topo.providers() {
            let rt = &self.nodes[n.id.0 as usize];
            let mut away = 0.0;
            for &(a, b) in &rt.away {
                away += (b.min(self.now) - a.max(from)).max(0.0);
            }
            if rt.state == NodeState::Away {
                away += (self.now - rt.away_since.max(from)).max(0.0);
            }
            total += self.sc.multipliers[n.id.0 as usize] * ((self.now - from) - away).max(0.0);
        }
        total
    }

    /// Per-unit-multiplier departure rates over the trailing window.
    fn pooled(&self, window: f64) -> Result<Option<Pooled>> {
        let from = (self.now - window).max(0.0);
        let exposure = self.exposure(from);
        if exposure < self.cfg.knobs.epoch_s {
            return Ok(None);
        }
        let conf = self.cfg.knobs.confidence;
        let est = estimate_hazard_pooled(&self.observed, self.now, self.now - from, exposure, conf)?;
        let all = self.observed.iter().filter(|e| e.time_s > from && e.time_s <= self.now).count();
        Ok(Some(Pooled {
            emergency_hat: est.lambda_hat,
            emergency_upper: est.lambda_upper,
            all_upper: poisson_upper(all, exposure, conf),
        }))
    }

    fn refresh_hazard_view(&mut self, total_per_unit: f64) -> Result<()> {
        let end = self.now + 10.0 * self.cfg.horizon_s.max(self.cfg.jobs.remaining_runtime_s);
        self.est_hazards = self
            .sc
            .multipliers
            .iter()
            .map(|m| HazardTrace::emergency_only(Piecewise::constant(self.now, end, m * total_per_unit)?))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn harmonic(&self, l: usize, window: f64) -> f64 {
        let from = (self.now - window).max(0.0);
        let s = self.series(l);
        let w = s.weighted_window(from, self.now.max(from + 1e-9));
        let total: f64 = w.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return s.value_at_or_last(self.now).0;
        }
        total / w.iter().map(|(v, d)| d / v).sum::<f64>()
    }

    fn on_tick(&mut self) -> Result<()> {
        let k = &self.cfg.knobs;
        let total_prior = self.cfg.generator.mean_lambda;
        let prior = total_prior * (1.0 - self.cfg.hazard.scheduled_fraction);
        let recent = self.pooled(k.hazard_window_s)?;
        self.refresh_hazard_view(recent.map(|p| p.all_upper).unwrap_or(total_prior))?;
        match self.strat.ckpt {
            CkptMode::Adaptive => {
                let lambda = recent.map(|p| p.emergency_upper).unwrap_or(prior);
                self.retune(lambda, false)?;
            }
            CkptMode::TvFixed => {
                let lambda = self.pooled(k.tv_window_s)?.map(|p| p.emergency_hat).unwrap_or(prior);
                self.retune(lambda, true)?;
            }
            _ => {}
        }
        self.admission_round()?;
        self.place_queued()?;
        let next = self.now + self.cfg.knobs.epoch_s;
        if next < self.cfg.horizon_s {
            self.queue.push(next, Event::ControllerTick);
        }
        Ok(())
    }

    /// Recomputes write rates and intervals per building store.
    fn retune(&mut self, lambda_unit: f64, long_window: bool) -> Result<()> {
        let k = self.cfg.knobs.clone();
        let bucket = self.cfg.generator.bucket_s;
        let topo = &self.sc.topo;
        let lower = |e: &Self, l: usize| -> Result<f64> {
            if long_window {
                Ok(e.harmonic(l, k.tv_window_s))
            } else {
                Ok(estimate_bandwidth_series(e.series(l), e.now, k.bandwidth_window_s, bucket)?.b_lower)
            }
        };
        for b in topo.buildings() {
            let store = topo.store_of(b).expect("store");
            let sl = topo.access_link(store).0 as usize;
            let budget = lower(self, sl)?;
            let members: Vec<usize> = (0..self.jobs.len())
                .filter(|&j| {
                    let job = &self.jobs[j];
                    matches!(job.phase, Phase::Running | Phase::Checkpointing)
                        && job.pending.is_none()
                        && job.episode.is_none()
                        && job.host.is_some_and(|h| topo.nodes()[h.0 as usize].building == b)
                })
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut tick = Vec::with_capacity(members.len());
            for &j in &members {
                let h = self.jobs[j].host.unwrap();
                let hl = topo.access_link(h).0 as usize;
                // Blocking writes from co-hosted jobs rarely overlap, so each
                // job is boxed by the whole host path.
                let cap = lower(self, hl)?.min(self.write_speed(h));
                let spec = &self.jobs[j].spec;
                tick.push(TickJob {
                    id: spec.id,
                    payload: spec.payload,
                    loss_budget_s: spec.loss_budget_s,
                    restart_s: spec.restart_s,
                    lambda_upper: (lambda_unit * self.sc.multipliers[h.0 as usize]).max(1e-12),
                    cap,
                    notice_s: None,
                });
            }
            let out = adaptive_ckpt_tick(&tick, budget, k.beta_p1)?;
            for d in &out.demands {
                let job = &mut self.jobs[d.job.0 as usize];
                job.interval = d.interval_s;
            }
            for inf in &out.infeasible {
                let job = &mut self.jobs[inf.job.0 as usize];
                job.interval = inf.cap_s;
                self.infeasible_intervals += 1;
            }
            for &j in &members {
                self.schedule_ckpt(j);
            }
        }
        Ok(())
    }

    // ---- results ----

    fn finish(mut self) -> SimReport {
        for j in 0..self.jobs.len() {
            self.settle(j);
        }
        let horizon = self.cfg.horizon_s;
        let mut err: f64 = 0.0;
        let (mut useful, mut overhead, mut downtime, mut busy) = (0.0, 0.0, 0.0, 0.0);
        for job in &self.jobs {
            err = err.max((job.running + job.overhead + job.downtime - horizon).abs());
            err = err.max((job.running - job.progress - job.lost).abs());
            useful += job.progress;
            overhead += job.overhead;
            downtime += job.downtime;
            busy += job.running + job.overhead;
        }
        let slots: f64 = self.sc.topo.providers().map(|n| n.gpu_slots as f64).sum();
        let iso: u64 = if self.strat.shaped {
            self.monitors.iter().zip(&self.access).filter(|(_, a)| **a).map(|(m, _)| m.violations).sum()
        } else {
            0
        };
        let degradation = if self.degr_ref > 0.0 { 100.0 * (1.0 - self.degr_served / self.degr_ref) } else { 0.0 };
        let success = if self.scheduled_reclaims > 0 {
            100.0 * self.zero_loss_handoffs.min(self.scheduled_reclaims) as f64 / self.scheduled_reclaims as f64
        } else {
            0.0
        };
        SimReport {
            policy: self.cfg.policy,
            seed: self.cfg.seed,
            horizon_s: horizon,
            work_loss_gpu_h: (self.loss_total + overhead) / 3600.0,
            rollback_gpu_h: self.loss_total / 3600.0,
            downtime_median_s: median(&self.downtimes),
            downtime_p99_s: percentile(&self.downtimes, 99.0),
            migration_success_pct: success,
            traffic_degradation_pct: degradation.max(0.0),
            gpu_utilization_pct: 100.0 * busy / (slots * horizon),
            useful_gpu_h: useful / 3600.0,
            overhead_gpu_h: overhead / 3600.0,
            downtime_gpu_h: downtime / 3600.0,
            departures: self.departures,
            emergency_reclaims: self.emergency_reclaims,
            scheduled_reclaims: self.scheduled_reclaims,
            zero_loss_handoffs: self.zero_loss_handoffs,
            checkpoints: self.checkpoints,
            admitted_flows: self.admitted_flows,
            degraded_flows: self.degraded_flows,
            unsustained_flows: self.unsustained_flows,
            deadline_violations: self.deadline_violations,
            isolation_violations: iso,
            infeasible_intervals: self.infeasible_intervals,
            conservation_error_s: err,
            downtimes_s: self.downtimes,
            log: self.log,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Policy;

    fn small(policy: Policy, seed: u64) -> ScenarioConfig {
        ScenarioConfig { seed, policy, horizon_s: 6.0 * 3600.0, ..ScenarioConfig::default() }
    }

    #[test]
    fn every_policy_conserves_time() {
        for p in Policy::SUBSETS.iter().chain(Policy::ONLINE.iter()) {
            let r = run(&small(*p, 3)).unwrap();
            assert!(r.conservation_error_s < 1e-6, "{p}: {}", r.conservation_error_s);
            assert!(!r.invariant_violated(), "{p}");
        }
    }

    #[test]
    fn same_seed_same_log() {
        let a = run(&small(Policy::Reclaimnet, 9)).unwrap();
        let b = run(&small(Policy::Reclaimnet, 9)).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_log(&mut x).unwrap();
        b.write_log(&mut y).unwrap();
        assert_eq!(x, y);
    }
}
