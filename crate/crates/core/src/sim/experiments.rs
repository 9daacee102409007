//! Focused experiments that isolate one mechanism each.

use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use crate::admission::{admit, BandwidthBudget, FlowId, IsolationMonitor, MigrationFlow, TokenBucket, TrafficClass};
use crate::checkpoint::{adaptivity_gap, local_interval, tv_fixed_interval, GapStats};
use crate::error::{ensure_positive, Error, Result};
use crate::hazard::{estimate_hazard_pooled, gen_correlated_trace, sample_departures_for, GeneratorParams, HazardTrace};
use crate::model::{generate_campus, BandwidthTrace, CampusParams, DepartureEvent, JobId, NodeId, Piecewise, Tier};
use crate::placement::{locality_dominance_check, LocalityReport};
use crate::rng::{label, stream};

/// One seed of the fixed-versus-adaptive interval comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRun {
    pub seed: u64,
    pub stats: GapStats,
    /// Checkpoint time plus rolled-back time, seconds.
    pub adaptive_waste_s: f64,
    pub fixed_waste_s: f64,
    pub failures: usize,
}

impl GapRun {
    pub fn simulated_ratio(&self) -> f64 {
        self.fixed_waste_s / self.adaptive_waste_s
    }
}

/// Replays one job against a failure sequence. `interval(t)` is the work
/// span the policy wants between checkpoints at time `t`; the checkpoint
/// write takes `payload / b(t)`. Returns wasted seconds.
fn replay_waste(
    lambda: &Piecewise,
    bw: &Piecewise,
    failures: &[f64],
    payload: f64,
    horizon: f64,
    interval: impl Fn(f64) -> f64,
) -> f64 {
    let mut t = 0.0;
    let mut last_end = 0.0;
    let mut waste = 0.0;
    let mut fi = 0;
    let next_fail = |fi: usize| failures.get(fi).copied().unwrap_or(f64::INFINITY);
    while t < horizon {
        // Work until the checkpoint is due; the due time follows the state.
        let due = last_end + interval(t);
        let boundary = lambda.next_change_after(t).unwrap_or(f64::INFINITY);
        let f = next_fail(fi);
        let step = due.max(t).min(boundary).min(f).min(horizon);
        if step == f && f < horizon {
            waste += f - last_end;
            last_end = f;
            t = f;
            fi += 1;
            continue;
        }
        t = step;
        if t >= horizon {
            break;
        }
        if t < due {
            continue;
        }
        let (b, _) = bw.value_at_or_last(t);
        let end = t + payload / b;
        let f = next_fail(fi);
        if f < end.min(horizon) {
            waste += f - last_end;
            last_end = f;
            t = f;
            fi += 1;
        } else if end >= horizon {
            waste += horizon - t;
            break;
        } else {
            waste += end - t;
            last_end = end;
            t = end;
        }
    }
    waste
}

/// Single-job Monte Carlo of the adaptivity gap on a generated trace.
///
/// The adaptive policy uses the current state's local optimum; the fixed
/// policy uses the best single interval for the trace's means. Both face
/// the same failure times.
pub fn gap_monte_carlo(params: &GeneratorParams, ckpt_time_s: f64, horizon_s: f64, seed: u64) -> Result<GapRun> {
    ensure_positive("ckpt_time_s", ckpt_time_s)?;
    let trace = gen_correlated_trace(params, horizon_s, seed)?;
    let samples: Vec<(f64, f64)> = trace.samples().iter().map(|s| (s.lambda, s.b_eff)).collect();
    let stats = adaptivity_gap(&samples)?;
    let payload = ckpt_time_s * params.mean_bw;
    let lambda = trace.lambda().clone();
    let bw = trace.b_eff().clone();
    let mut rng = stream(seed, label::EXPERIMENT, 2);
    let failures: Vec<f64> = sample_departures_for(&trace.hazard, NodeId(0), 0.0, horizon_s, &mut rng)?
        .into_iter()
        .map(|e| e.time_s)
        .collect();
    let fixed = tv_fixed_interval(stats.mean_lambda, stats.mean_theta, payload)?;
    let adaptive = |t: f64| {
        let l = lambda.value_at_or_last(t).0;
        let b = bw.value_at_or_last(t).0;
        local_interval(payload, l, b).unwrap_or(horizon_s)
    };
    let adaptive_waste_s = replay_waste(&lambda, &bw, &failures, payload, horizon_s, adaptive);
    let fixed_waste_s = replay_waste(&lambda, &bw, &failures, payload, horizon_s, |_| fixed);
    Ok(GapRun { seed, stats, adaptive_waste_s, fixed_waste_s, failures: failures.len() })
}

/// Pooled result over seeds: predicted ratio from the pooled statistics and
/// simulated ratio of summed waste.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSummary {
    pub predicted_ratio: f64,
    pub simulated_ratio: f64,
    pub seeds: usize,
}

pub fn summarize_gap(runs: &[GapRun]) -> Result<GapSummary> {
    if runs.is_empty() {
        return Err(Error::Empty("gap runs"));
    }
    let n = runs.len() as f64;
    let ml = runs.iter().map(|r| r.stats.mean_lambda).sum::<f64>() / n;
    let mt = runs.iter().map(|r| r.stats.mean_theta).sum::<f64>() / n;
    let mw = runs.iter().map(|r| r.stats.mean_w).sum::<f64>() / n;
    let fixed: f64 = runs.iter().map(|r| r.fixed_waste_s).sum();
    let adaptive: f64 = runs.iter().map(|r| r.adaptive_waste_s).sum();
    Ok(GapSummary {
        predicted_ratio: ((ml * mt) / (mw * mw)).max(1.0).sqrt(),
        simulated_ratio: fixed / adaptive,
        seeds: runs.len(),
    })
}

/// A step change in the no-notice rate of a provider pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSetup {
    pub providers: u32,
    pub base_rate_per_h: f64,
    pub factor: f64,
    pub shift_at_s: f64,
    pub window_s: f64,
    pub tolerance: f64,
    /// Post-shift events allowed before convergence must have happened.
    pub event_budget: usize,
    pub horizon_s: f64,
    pub seed: u64,
}

impl Default for DriftSetup {
    fn default() -> Self {
        Self {
            providers: 200,
            base_rate_per_h: 0.99,
            factor: 1.7,
            shift_at_s: 43_200.0,
            window_s: 7200.0,
            tolerance: 0.10,
            event_budget: 2500,
            horizon_s: 86_400.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftWindow {
    pub end_s: f64,
    pub lambda_hat: f64,
    pub lambda_true: f64,
    pub rel_err: f64,
    pub events_since_shift: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftOutcome {
    pub windows: Vec<DriftWindow>,
    /// End of the second of two consecutive in-tolerance windows.
    pub converged_at_s: Option<f64>,
    pub events_to_converge: Option<usize>,
}

impl DriftOutcome {
    pub fn within_budget(&self, budget: usize) -> bool {
        self.events_to_converge.is_some_and(|n| n <= budget)
    }
}

/// Tumbling windows of the pooled point estimate after the shift.
pub fn drift_reconvergence(s: &DriftSetup) -> Result<DriftOutcome> {
    ensure_positive("providers", s.providers as f64)?;
    ensure_positive("window_s", s.window_s)?;
    ensure_positive("factor", s.factor)?;
    if !(s.shift_at_s > 0.0 && s.shift_at_s < s.horizon_s) {
        return Err(Error::OutOfRange { what: "shift_at_s", value: s.shift_at_s });
    }
    let base = s.base_rate_per_h / 3600.0;
    let trace = HazardTrace::emergency_only(Piecewise::constant(0.0, s.horizon_s, base)?)?.scaled_from(s.shift_at_s, s.factor)?;
    let mut log: Vec<DepartureEvent> = Vec::new();
    for p in 0..s.providers {
        let mut rng = stream(s.seed, label::DEPARTURES, p as u64);
        log.extend(sample_departures_for(&trace, NodeId(p), 0.0, s.horizon_s, &mut rng)?);
    }
    log.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    let truth = base * s.factor;
    let exposure = s.providers as f64 * s.window_s;
    let mut windows = Vec::new();
    let mut streak = 0;
    let mut converged = None;
    let mut end = s.shift_at_s + s.window_s;
    while end <= s.horizon_s {
        let est = estimate_hazard_pooled(&log, end, s.window_s, exposure, 0.95)?;
        let rel_err = (est.lambda_hat - truth).abs() / truth;
        let events_since_shift = log.iter().filter(|e| e.time_s > s.shift_at_s && e.time_s <= end).count();
        windows.push(DriftWindow { end_s: end, lambda_hat: est.lambda_hat, lambda_true: truth, rel_err, events_since_shift });
        if rel_err < s.tolerance {
            streak += 1;
            if streak == 2 && converged.is_none() {
                converged = Some((end, events_since_shift));
            }
        } else {
            streak = 0;
        }
        end += s.window_s;
    }
    Ok(DriftOutcome {
        windows,
        converged_at_s: converged.map(|c| c.0),
        events_to_converge: converged.map(|c| c.1),
    })
}

/// Adversarial migration load on one shaped bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationStress {
    pub capacity: f64,
    pub b_min: f64,
    pub beta: f64,
    pub ticks: u64,
    pub tick_s: f64,
    /// Offered migration load as a multiple of the migration share.
    pub load_factor: f64,
    /// Re-admission period, in ticks.
    pub epoch_ticks: u64,
    pub seed: u64,
}

impl Default for IsolationStress {
    fn default() -> Self {
        Self { capacity: 10.0, b_min: 3.0, beta: 0.3, ticks: 100_000, tick_s: 0.1, load_factor: 3.0, epoch_ticks: 10, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationOutcome {
    pub monitor: IsolationMonitor,
    /// Migration bytes arriving per second over the run.
    pub offered_rate: f64,
    pub carried_rate: f64,
    /// Smallest research rate seen in any tick, with research always backlogged.
    pub min_research_rate: f64,
}

struct Pending {
    flow: MigrationFlow,
    left: f64,
    bucket: Option<TokenBucket>,
}

/// Flows arrive in bursts with random sizes and notices and always have
/// data to send. Each admitted flow is paced by its own bucket, refused
/// flows take what the admitted ones leave, and the whole class is capped
/// by one bucket debited once per tick.
pub fn isolation_stress(s: &IsolationStress) -> Result<IsolationOutcome> {
    let budget = BandwidthBudget::new(s.capacity, s.b_min, s.beta)?;
    ensure_positive("tick_s", s.tick_s)?;
    let share = budget.migration;
    let mut rng = stream(s.seed, label::FLOWS, 0);
    // Mean flow size 4 units at line rate; bursts of 1-6 flows.
    let mean_size = 4.0;
    let mean_burst = 3.5;
    let burst_rate = s.load_factor * share / (mean_size * mean_burst);
    let gaps = Exp::new(burst_rate).map_err(|e| Error::Parse(e.to_string()))?;
    let sizes = Exp::new(1.0 / mean_size).map_err(|e| Error::Parse(e.to_string()))?;
    let mut next_burst = gaps.sample(&mut rng);
    let mut class = TokenBucket::with_capacity(share, share * s.tick_s, 0.0);
    let mut monitor = IsolationMonitor::new(s.capacity, budget.reserved);
    let mut flows: Vec<Pending> = Vec::new();
    let mut next_id = 0u64;
    let (mut offered, mut carried) = (0.0, 0.0);
    let mut min_research = f64::INFINITY;
    for k in 0..s.ticks {
        let now = k as f64 * s.tick_s;
        while next_burst < now + s.tick_s {
            for _ in 0..rng.random_range(1..=6) {
                let size = sizes.sample(&mut rng).max(1e-9);
                let notice = rng.random_range(1.0..20.0);
                let mut f = MigrationFlow::new(
                    FlowId(next_id),
                    JobId(next_id as u32),
                    NodeId(0),
                    NodeId(1),
                    size,
                    notice,
                    0.0,
                    TrafficClass::Planned,
                    next_burst,
                );
                f.path_cap = s.capacity;
                next_id += 1;
                flows.push(Pending { flow: f, left: size, bucket: None });
                offered += size;
            }
            next_burst += gaps.sample(&mut rng);
        }
        if k % s.epoch_ticks == 0 {
            let view: Vec<MigrationFlow> = flows
                .iter()
                .map(|p| {
                    let mut f = p.flow.clone();
                    f.payload = p.left;
                    f.notice_s = (f.arrival_s + f.notice_s - now).max(0.0);
                    f
                })
                .collect();
            let adm = admit(&view, &budget, now);
            for p in &mut flows {
                match adm.admitted.iter().find(|f| f.id == p.flow.id) {
                    Some(f) => match p.bucket.as_mut() {
                        Some(b) => b.set_rate(f.assigned_rate, now),
                        None => p.bucket = Some(TokenBucket::new(f.assigned_rate, now)),
                    },
                    None => p.bucket = None,
                }
            }
        }
        let end = (k + 1) as f64 * s.tick_s;
        // Admitted flows draw on the class first, refused ones best effort.
        let mut granted = 0.0;
        for admitted in [true, false] {
            let mut asks = Vec::with_capacity(flows.len());
            for p in &mut flows {
                let line = p.left.min(s.capacity * s.tick_s);
                let ask = match (admitted, p.bucket.as_mut()) {
                    (true, Some(b)) => b.take_up_to(line, end),
                    (false, None) => line,
                    _ => 0.0,
                };
                asks.push(ask);
            }
            let want: f64 = asks.iter().sum();
            let got = class.take_up_to(want, end);
            let scale = if want > 0.0 { got / want } else { 0.0 };
            for (p, a) in flows.iter_mut().zip(&asks) {
                p.left -= a * scale;
            }
            granted += got;
        }
        flows.retain(|p| p.left > 1e-12 && p.flow.arrival_s + p.flow.notice_s > end);
        let rate = granted / s.tick_s;
        carried += granted;
        monitor.record(rate, 0.0);
        min_research = min_research.min(s.capacity - rate);
    }
    let span = s.ticks as f64 * s.tick_s;
    Ok(IsolationOutcome { monitor, offered_rate: offered / span, carried_rate: carried / span, min_research_rate: min_research })
}

/// Locality check over generated windows. Intra-building links are drawn at
/// least `ratio` times above every distribution and core link.
pub fn locality_windows(windows: usize, ratio: f64, seed: u64) -> Result<Vec<LocalityReport>> {
    ensure_positive("ratio", ratio)?;
    let mut rng = stream(seed, label::EXPERIMENT, 3);
    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let params = CampusParams {
            buildings: rng.random_range(2..=6),
            nodes_per_building: rng.random_range(2..=6),
            store_bytes_per_s: 0.0,
            ..CampusParams::default()
        };
        let topo = generate_campus(&params, &mut stream(seed, label::TOPOLOGY, w as u64))?;
        let span = 600.0;
        let segments = 6;
        let core_top = rng.random_range(20e6..150e6);
        let mut series = Vec::with_capacity(topo.links().len());
        for l in topo.links() {
            let values = (0..segments)
                .map(|_| match l.tier {
                    Tier::Access => core_top * ratio * rng.random_range(1.0..2.0),
                    Tier::Distribution | Tier::Core => core_top * rng.random_range(0.2..=1.0),
                })
                .collect();
            series.push(Piecewise::uniform(0.0, span / segments as f64, values)?);
        }
        let bw = BandwidthTrace::new(series)?;
        let providers: Vec<NodeId> = topo.providers().map(|n| n.id).collect();
        let src = providers[rng.random_range(0..providers.len())];
        let t = rng.random_range(0.0..span);
        let payload = rng.random_range(1e9..20e9);
        let restart = rng.random_range(10.0..60.0);
        out.push(locality_dominance_check(&topo, &bw, src, t, payload, restart)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_has_no_simulated_gap() {
        let p = GeneratorParams { cv_lambda: 0.0, cv_inv_bw: 0.0, ..GeneratorParams::default() };
        let r = gap_monte_carlo(&p, 48.0, 7.0 * 86_400.0, 3).unwrap();
        assert!((r.stats.predicted_ratio - 1.0).abs() < 1e-12);
        assert!((r.simulated_ratio() - 1.0).abs() < 1e-9, "{}", r.simulated_ratio());
        assert!(r.failures > 100);
    }

    #[test]
    fn no_failures_cost_only_checkpoints() {
        let l = Piecewise::constant(0.0, 1000.0, 1e-4).unwrap();
        let b = Piecewise::constant(0.0, 1000.0, 10.0).unwrap();
        // 100 s of work then 10 s of write: 9 full cycles, then 10 s of work.
        let w = replay_waste(&l, &b, &[], 100.0, 1000.0, |_| 100.0);
        assert!((w - 90.0).abs() < 1e-9, "{w}");
        // A failure at 150 s loses the 40 s since the first write ended.
        let w = replay_waste(&l, &b, &[150.0], 100.0, 260.0, |_| 100.0);
        assert!((w - (10.0 + 40.0 + 10.0)).abs() < 1e-9, "{w}");
    }

    #[test]
    fn drift_estimate_reconverges() {
        let s = DriftSetup::default();
        let out = drift_reconvergence(&s).unwrap();
        assert!(out.within_budget(s.event_budget), "{out:?}");
        assert!(out.windows.iter().all(|w| w.end_s > s.shift_at_s));
    }

    #[test]
    fn shaped_class_never_exceeds_its_share() {
        let s = IsolationStress { ticks: 20_000, ..IsolationStress::default() };
        let out = isolation_stress(&s).unwrap();
        assert_eq!(out.monitor.violations, 0);
        assert!(out.offered_rate >= 3.0 * 7.0, "{}", out.offered_rate);
        assert!(out.monitor.max_controlled <= 7.0 + 1e-9);
        assert!(out.min_research_rate >= 3.0 - 1e-9);
        assert!(out.carried_rate > 3.0, "{}", out.carried_rate);
    }

    #[test]
    fn separated_windows_favour_local_transfers() {
        let reps = locality_windows(40, 3.4, 5).unwrap();
        assert!(reps.iter().all(|r| matches!(r, LocalityReport::Holds { .. })), "{reps:?}");
    }
}
