//! Clairvoyant minimum loss on tiny slotted instances.
//!
//! Time is a grid of equal slots. Every job sits on its own single-slot
//! node; the full departure trace is known in advance. Per slot a running job
//! may start a checkpoint (one at a time, at most `store_capacity` concurrent
//! writes per building store); on a reclaim signal it picks a handoff
//! destination or stays; after a rollback it picks a free node to restore on.
//! Loss counts checkpoint slots, rolled-back slots and the restart that
//! follows a rollback.
//!
//! [`oracle_tiny`] walks every assignment of those choices. [`replay`] runs a
//! fixed online rule over the same model, so the two are directly
//! comparable.

use rand::Rng as _;

use crate::checkpoint::local_interval;
use crate::error::{Error, Result};
use crate::rng::{label, stream, Rng};
use crate::sim::config::Policy;

pub const MAX_NODES: usize = 4;
pub const MAX_JOBS: usize = 3;
pub const MAX_EVENTS: usize = 6;
pub const MAX_ASSIGNMENTS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TinyJob {
    pub host: usize,
    pub ckpt_slots: u32,
    pub restart_slots: u32,
    /// Transfer time within one building.
    pub local_slots: u32,
    /// Transfer time across buildings.
    pub remote_slots: u32,
}

/// A reclaim signal; `notice_slots == 0` is an emergency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinyEvent {
    pub slot: u32,
    pub node: usize,
    pub notice_slots: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    pub slot_s: f64,
    pub horizon_slots: u32,
    /// Building of each node.
    pub buildings: Vec<u32>,
    pub jobs: Vec<TinyJob>,
    pub events: Vec<TinyEvent>,
    pub store_capacity: u32,
    /// Prior no-notice rate per node, events/s, used by the online rules.
    pub emergency_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinyOutcome {
    pub loss_slots: u32,
    pub loss_s: f64,
    pub assignments: u64,
}

impl TinyInstance {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config("tiny", msg));
        if self.buildings.is_empty() || self.buildings.len() > MAX_NODES {
            return bad(format!("1..={MAX_NODES} nodes, got {}", self.buildings.len()));
        }
        if self.jobs.is_empty() || self.jobs.len() > MAX_JOBS {
            return bad(format!("1..={MAX_JOBS} jobs, got {}", self.jobs.len()));
        }
        if self.events.len() > MAX_EVENTS {
            return bad(format!("at most {MAX_EVENTS} events, got {}", self.events.len()));
        }
        if !(self.slot_s > 0.0) || self.horizon_slots == 0 || self.store_capacity == 0 {
            return bad("slot length, horizon and store capacity must be positive".into());
        }
        let n = self.buildings.len();
        for (i, j) in self.jobs.iter().enumerate() {
            if j.host >= n || self.jobs[..i].iter().any(|o| o.host == j.host) {
                return bad(format!("job {i} needs its own node"));
            }
            if j.ckpt_slots == 0 || j.local_slots == 0 || j.remote_slots == 0 {
                return bad(format!("job {i}: transfer times must be at least one slot"));
            }
        }
        if self.events.iter().any(|e| e.node >= n) {
            return bad("event on unknown node".into());
        }
        Ok(())
    }
}

/// Source of choices for one run through the model.
trait Decider {
    fn checkpoint(&mut self, world: &World, job: usize) -> bool;
    /// Picks one of `options` (node ids; `None` means stay or wait).
    fn destination(&mut self, world: &World, job: usize, options: &[Option<usize>], handoff: bool) -> Option<usize>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ph {
    Running,
    Checkpointing { left: u32, snapshot: u32 },
    /// Transfer then restart; the job resumes on `host` afterwards.
    Moving { transfer_left: u32, restart_left: u32, snapshot: Option<u32> },
    /// Paused by a handoff that cannot finish; waits for the withdrawal.
    Stalled,
    Idle,
}

#[derive(Debug, Clone)]
struct JobSt {
    host: Option<usize>,
    ph: Ph,
    progress: u32,
    saved: u32,
    saved_building: u32,
    loss: u32,
    since_ckpt: u32,
}

#[derive(Debug, Clone)]
struct World<'a> {
    inst: &'a TinyInstance,
    online: Vec<bool>,
    leaving: Vec<Option<u32>>,
    jobs: Vec<JobSt>,
}

impl<'a> World<'a> {
    fn new(inst: &'a TinyInstance) -> Self {
        let jobs = inst
            .jobs
            .iter()
            .map(|j| JobSt {
                host: Some(j.host),
                ph: Ph::Running,
                progress: 0,
                saved: 0,
                saved_building: inst.buildings[j.host],
                loss: 0,
                since_ckpt: 0,
            })
            .collect();
        let n = inst.buildings.len();
        Self { inst, online: vec![true; n], leaving: vec![None; n], jobs }
    }

    fn transfer(&self, job: usize, from_building: u32, to: usize) -> u32 {
        let j = &self.inst.jobs[job];
        if self.inst.buildings[to] == from_building {
            j.local_slots
        } else {
            j.remote_slots
        }
    }

    fn occupied(&self, node: usize) -> bool {
        self.jobs.iter().any(|j| j.host == Some(node) && j.ph != Ph::Idle)
    }

    fn free_nodes(&self) -> Vec<usize> {
        (0..self.online.len()).filter(|&n| self.online[n] && self.leaving[n].is_none() && !self.occupied(n)).collect()
    }

    fn writers(&self, building: u32) -> u32 {
        self.jobs
            .iter()
            .filter(|j| matches!(j.ph, Ph::Checkpointing { .. }))
            .filter(|j| j.host.is_some_and(|h| self.inst.buildings[h] == building))
            .count() as u32
    }

    /// Rolls back and restores on a free node, or idles if none is free.
    /// The restart is owed either way.
    fn rollback(&mut self, job: usize, d: &mut dyn Decider) {
        let restart = self.inst.jobs[job].restart_slots;
        let st = &mut self.jobs[job];
        st.loss += st.progress - st.saved + restart;
        st.progress = st.saved;
        st.host = None;
        st.ph = Ph::Idle;
        let options: Vec<Option<usize>> = self.free_nodes().into_iter().map(Some).collect();
        if options.is_empty() {
            return;
        }
        if let Some(dst) = d.destination(self, job, &options, false) {
            let transfer = self.transfer(job, self.jobs[job].saved_building, dst);
            let st = &mut self.jobs[job];
            st.host = Some(dst);
            st.ph = Ph::Moving { transfer_left: transfer, restart_left: restart, snapshot: None };
        }
    }

    fn withdraw(&mut self, node: usize, d: &mut dyn Decider) {
        self.online[node] = false;
        self.leaving[node] = None;
        for job in 0..self.jobs.len() {
            let st = &self.jobs[job];
            if st.host != Some(node) || st.ph == Ph::Idle {
                continue;
            }
            // A transfer onto this node dies with it.
            self.rollback(job, d);
        }
    }

    fn signal(&mut self, ev: TinyEvent, d: &mut dyn Decider) {
        if !self.online[ev.node] || self.leaving[ev.node].is_some() {
            return;
        }
        if ev.notice_slots == 0 {
            self.withdraw(ev.node, d);
            return;
        }
        let withdraw_at = ev.slot + ev.notice_slots;
        self.leaving[ev.node] = Some(withdraw_at);
        let Some(job) = self.jobs.iter().position(|j| j.host == Some(ev.node) && j.ph != Ph::Idle) else {
            return;
        };
        if !matches!(self.jobs[job].ph, Ph::Running | Ph::Checkpointing { .. }) {
            return;
        }
        let mut options: Vec<Option<usize>> = vec![None];
        options.extend(self.free_nodes().into_iter().map(Some));
        if let Some(dst) = d.destination(self, job, &options, true) {
            let src_building = self.inst.buildings[ev.node];
            let transfer = self.transfer(job, src_building, dst);
            let restart = self.inst.jobs[job].restart_slots;
            let st = &mut self.jobs[job];
            // The transfer has to land before the withdrawal.
            if transfer <= ev.notice_slots {
                st.host = Some(dst);
                st.ph = Ph::Moving { transfer_left: transfer, restart_left: restart, snapshot: Some(st.progress) };
            } else {
                st.ph = Ph::Stalled;
            }
        }
    }

    fn step(&mut self, t: u32, d: &mut dyn Decider) {
        for n in 0..self.online.len() {
            if self.leaving[n] == Some(t) {
                self.withdraw(n, d);
            }
        }
        let mut evs: Vec<TinyEvent> = self.inst.events.iter().copied().filter(|e| e.slot == t).collect();
        evs.sort_by_key(|e| e.node);
        for ev in evs {
            self.signal(ev, d);
        }
        for job in 0..self.jobs.len() {
            if self.jobs[job].ph != Ph::Running {
                continue;
            }
            let host = self.jobs[job].host.expect("running job has a host");
            let building = self.inst.buildings[host];
            if self.writers(building) >= self.inst.store_capacity {
                continue;
            }
            if d.checkpoint(self, job) {
                let left = self.inst.jobs[job].ckpt_slots;
                let st = &mut self.jobs[job];
                st.ph = Ph::Checkpointing { left, snapshot: st.progress };
            }
        }
        for job in 0..self.jobs.len() {
            let building = self.jobs[job].host.map(|h| self.inst.buildings[h]);
            let st = &mut self.jobs[job];
            match st.ph {
                Ph::Running => {
                    st.progress += 1;
                    st.since_ckpt += 1;
                }
                Ph::Checkpointing { left, snapshot } => {
                    st.loss += 1;
                    if left == 1 {
                        st.saved = snapshot;
                        st.saved_building = building.expect("checkpointing job has a host");
                        st.since_ckpt = st.progress - snapshot;
                        st.ph = Ph::Running;
                    } else {
                        st.ph = Ph::Checkpointing { left: left - 1, snapshot };
                    }
                }
                Ph::Moving { mut transfer_left, mut restart_left, snapshot } => {
                    if transfer_left > 0 {
                        transfer_left -= 1;
                        if transfer_left == 0 {
                            if let Some(s) = snapshot {
                                st.saved = s;
                                st.saved_building = building.expect("moving job has a target");
                            }
                        }
                    } else {
                        restart_left -= 1;
                    }
                    if transfer_left == 0 && restart_left == 0 {
                        st.since_ckpt = st.progress - st.saved;
                        st.ph = Ph::Running;
                    } else {
                        st.ph = Ph::Moving { transfer_left, restart_left, snapshot };
                    }
                }
                Ph::Stalled | Ph::Idle => {}
            }
        }
    }

    fn run(mut self, d: &mut dyn Decider) -> u32 {
        for t in 0..self.inst.horizon_slots {
            self.step(t, d);
        }
        self.jobs.iter().map(|j| j.loss).sum()
    }
}

/// Replays a recorded prefix of choices, then takes option 0 and records the
/// fan-out of every new decision point.
struct Odometer {
    path: Vec<(usize, usize)>,
    pos: usize,
}

impl Odometer {
    fn pick(&mut self, n: usize) -> usize {
        if self.pos < self.path.len() {
            let c = self.path[self.pos].0;
            self.pos += 1;
            c
        } else {
            self.path.push((0, n));
            self.pos += 1;
            0
        }
    }

    /// Advances to the next leaf; false when every leaf was visited.
    fn advance(&mut self) -> bool {
        while let Some((c, n)) = self.path.pop() {
            if c + 1 < n {
                self.path.push((c + 1, n));
                self.pos = 0;
                return true;
            }
        }
        false
    }
}

impl Decider for Odometer {
    fn checkpoint(&mut self, _: &World, _: usize) -> bool {
        self.pick(2) == 1
    }

    fn destination(&mut self, _: &World, _: usize, options: &[Option<usize>], _: bool) -> Option<usize> {
        options[self.pick(options.len())]
    }
}

/// Minimum loss over every checkpoint and destination assignment.
///
/// Refuses with [`Error::TooLarge`] once more than [`MAX_ASSIGNMENTS`]
/// assignments have been visited.
pub fn oracle_tiny(inst: &TinyInstance) -> Result<TinyOutcome> {
    inst.validate()?;
    let mut od = Odometer { path: Vec::new(), pos: 0 };
    let mut best = u32::MAX;
    let mut leaves = 0u64;
    loop {
        od.pos = 0;
        let loss = World::new(inst).run(&mut od);
        best = best.min(loss);
        leaves += 1;
        if leaves > MAX_ASSIGNMENTS {
            return Err(Error::TooLarge { assignments: size_bound(inst), limit: MAX_ASSIGNMENTS as f64 });
        }
        if !od.advance() {
            break;
        }
    }
    Ok(TinyOutcome { loss_slots: best, loss_s: best as f64 * inst.slot_s, assignments: leaves })
}

/// Loose count of assignments: a binary checkpoint choice per job and slot
/// times a destination choice per signal and per rollback.
pub fn size_bound(inst: &TinyInstance) -> f64 {
    let per_job = 2f64.powi(inst.horizon_slots as i32);
    let choices = (inst.buildings.len() + 1) as f64;
    per_job.powi(inst.jobs.len() as i32) * choices.powi(2 * inst.events.len() as i32)
}

/// An online rule replayed on the slotted model.
struct OnlineRule {
    interval: Vec<u32>,
    topo_aware: bool,
    migrate: bool,
    rng: Rng,
}

impl OnlineRule {
    fn new(policy: Policy, inst: &TinyInstance, seed: u64) -> Result<Self> {
        let fixed = |s: f64| ((s / inst.slot_s).round() as u32).max(1);
        let (adaptive, fixed_s, topo_aware, migrate) = match policy {
            Policy::Reclaimnet | Policy::TvFixed | Policy::NoTcbpf | Policy::P1P2 => (true, 0.0, true, true),
            Policy::RandomDst | Policy::P1P3 | Policy::P1Only => (true, 0.0, false, true),
            Policy::StaticCkpt => (false, 600.0, false, true),
            Policy::AllOff | Policy::P3Only => (false, 1800.0, false, true),
            Policy::P2Only | Policy::P2P3 => (false, 1800.0, true, true),
            Policy::NoMigration => (false, 1800.0, false, false),
            Policy::OracleTiny => return Err(Error::config("policy", "oracle_tiny is not an online rule")),
        };
        let interval = inst
            .jobs
            .iter()
            .map(|j| {
                if adaptive {
                    // Write time C/b is the checkpoint duration.
                    let c_over_b = j.ckpt_slots as f64 * inst.slot_s;
                    local_interval(c_over_b, inst.emergency_rate, 1.0).map(fixed)
                } else {
                    Ok(fixed(fixed_s))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { interval, topo_aware, migrate, rng: stream(seed, label::RANDOM_DST, 0) })
    }
}

impl Decider for OnlineRule {
    fn checkpoint(&mut self, w: &World, job: usize) -> bool {
        let st = &w.jobs[job];
        let leaving = st.host.is_some_and(|h| w.leaving[h].is_some());
        !leaving && st.since_ckpt >= self.interval[job]
    }

    fn destination(&mut self, w: &World, job: usize, options: &[Option<usize>], handoff: bool) -> Option<usize> {
        let nodes: Vec<usize> = options.iter().flatten().copied().collect();
        if nodes.is_empty() || (handoff && !self.migrate) {
            return None;
        }
        if !self.topo_aware {
            return Some(nodes[self.rng.random_range(0..nodes.len())]);
        }
        let from = if handoff {
            w.inst.buildings[w.jobs[job].host.expect("signalled job has a host")]
        } else {
            w.jobs[job].saved_building
        };
        nodes.into_iter().min_by_key(|&n| (w.transfer(job, from, n), n))
    }
}

/// Loss of one online policy on a tiny instance.
pub fn replay(inst: &TinyInstance, policy: Policy, seed: u64) -> Result<TinyOutcome> {
    inst.validate()?;
    let mut rule = OnlineRule::new(policy, inst, seed)?;
    let loss = World::new(inst).run(&mut rule);
    Ok(TinyOutcome { loss_slots: loss, loss_s: loss as f64 * inst.slot_s, assignments: 1 })
}

/// Random tiny instance: 3-4 nodes in two buildings, 1-3 jobs, up to six
/// signals, a horizon short enough for exhaustive search.
pub fn random_tiny(seed: u64) -> TinyInstance {
    let mut rng = stream(seed, label::EXPERIMENT, 0);
    let nodes = rng.random_range(3..=MAX_NODES);
    let jobs = rng.random_range(1..=MAX_JOBS.min(nodes - 1));
    let horizon_slots = match jobs {
        1 => 8,
        2 => 6,
        _ => 4,
    };
    let buildings = (0..nodes).map(|n| (n % 2) as u32).collect();
    let jobs = (0..jobs)
        .map(|host| TinyJob {
            host,
            ckpt_slots: 1,
            restart_slots: rng.random_range(0..=1),
            local_slots: 1,
            remote_slots: rng.random_range(1..=3),
        })
        .collect();
    let n_events = rng.random_range(1..=3);
    let events = (0..n_events)
        .map(|_| TinyEvent {
            slot: rng.random_range(1..horizon_slots),
            node: rng.random_range(0..nodes),
            notice_slots: if rng.random_bool(0.42) { 0 } else { rng.random_range(1..=3) },
        })
        .collect();
    TinyInstance {
        slot_s: 300.0,
        horizon_slots,
        buildings,
        jobs,
        events,
        store_capacity: 1,
        emergency_rate: 0.42 / 3600.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_job(events: Vec<TinyEvent>, horizon_slots: u32) -> TinyInstance {
        TinyInstance {
            slot_s: 60.0,
            horizon_slots,
            buildings: vec![0, 0, 1],
            jobs: vec![TinyJob { host: 0, ckpt_slots: 1, restart_slots: 1, local_slots: 1, remote_slots: 3 }],
            events,
            store_capacity: 1,
            emergency_rate: 1e-3,
        }
    }

    #[test]
    fn no_events_no_loss() {
        let out = oracle_tiny(&one_job(vec![], 4)).unwrap();
        assert_eq!(out.loss_slots, 0);
        assert_eq!(out.assignments, 16);
    }

    #[test]
    fn emergency_costs_one_write_and_a_restart() {
        // Emergency at slot 3: best is a write in slot 2 (one slot) plus the
        // restart after the (empty) rollback; skipping it loses 3 + 1.
        let inst = one_job(vec![TinyEvent { slot: 3, node: 0, notice_slots: 0 }], 6);
        assert_eq!(oracle_tiny(&inst).unwrap().loss_slots, 2);
    }

    #[test]
    fn feasible_notice_means_zero_loss() {
        let inst = one_job(vec![TinyEvent { slot: 2, node: 0, notice_slots: 2 }], 6);
        assert_eq!(oracle_tiny(&inst).unwrap().loss_slots, 0);
    }

    #[test]
    fn infeasible_notice_forces_analytic_minimum() {
        // Every destination is remote (3 slots) against a 1-slot notice.
        let mut inst = one_job(vec![TinyEvent { slot: 2, node: 0, notice_slots: 1 }], 6);
        inst.buildings = vec![0, 1, 1];
        // write in slot 2 (1) + restart (1); nothing is rolled back
        assert_eq!(oracle_tiny(&inst).unwrap().loss_slots, 2);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = TinyInstance {
            slot_s: 60.0,
            horizon_slots: 12,
            buildings: vec![0, 0, 1, 1],
            jobs: (0..3)
                .map(|h| TinyJob { host: h, ckpt_slots: 1, restart_slots: 1, local_slots: 1, remote_slots: 2 })
                .collect(),
            events: vec![],
            store_capacity: 3,
            emergency_rate: 1e-3,
        };
        assert!(matches!(oracle_tiny(&inst), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn rejects_shapes_outside_the_limits() {
        let mut inst = one_job(vec![], 4);
        inst.buildings = vec![0; 5];
        assert!(matches!(inst.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn oracle_bounds_every_online_rule() {
        for seed in 0..30 {
            let inst = random_tiny(seed);
            let best = oracle_tiny(&inst).unwrap().loss_slots;
            for p in Policy::ONLINE {
                let got = replay(&inst, p, seed).unwrap().loss_slots;
                assert!(best <= got, "seed {seed} {p}: oracle {best} > {got}");
            }
        }
    }
}
