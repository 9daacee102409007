//! Builds the simulated world for one seed.

use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal};

use crate::error::{Error, Result};
use crate::hazard::{gen_correlated_trace, sample_departures_for, CorrelatedTrace, HazardTrace, NoticeDist};
use crate::model::{
    generate_campus, BandwidthTrace, DepartureEvent, DepartureKind, JobId, Piecewise, Tier, Topology,
};
use crate::rng::{label, stream};
use crate::sim::config::ScenarioConfig;

/// Static description of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub id: JobId,
    pub payload: f64,
    pub restart_s: f64,
    pub loss_budget_s: f64,
    pub vram_bytes: f64,
    pub min_cuda: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topo: Topology,
    /// Available bandwidth per link, bytes/s.
    pub bandwidth: BandwidthTrace,
    /// Campus-wide hazard and bandwidth factor.
    pub campus: CorrelatedTrace,
    /// Per-node departure intensity, indexed by node id (stores are zero).
    pub hazards: Vec<HazardTrace>,
    /// Per-node hazard multipliers (mean one over providers).
    pub multipliers: Vec<f64>,
    /// Every sampled reclaim signal, time-ordered. Signals that hit a node
    /// already away are dropped by the engine.
    pub departures: Vec<DepartureEvent>,
    pub jobs: Vec<JobSpec>,
}

fn notice_dist(cfg: &ScenarioConfig) -> Result<NoticeDist> {
    let h = &cfg.hazard;
    if h.notice_sigma > 0.0 {
        NoticeDist::lognormal(h.notice_median_s, h.notice_sigma, h.notice_floor_s)
    } else {
        NoticeDist::fixed(h.notice_median_s, h.notice_floor_s)
    }
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let mut topo = match &cfg.topology_file {
            Some(path) => crate::io::read_topology(path)?,
            None => generate_campus(&cfg.topology, &mut stream(seed, label::TOPOLOGY, 0))?,
        };
        if topo.providers().next().is_none() {
            return Err(Error::Topology("no provider nodes".into()));
        }
        if topo.buildings().iter().any(|b| topo.store_of(*b).is_none()) {
            return Err(Error::Topology("every building needs a checkpoint store".into()));
        }
        // Each node gets its own hazard profile.
        let mut nodes = topo.nodes().to_vec();
        for n in &mut nodes {
            n.hazard_profile = n.id.0;
        }
        topo = Topology::new(nodes, topo.switches().to_vec(), topo.links().to_vec())?;

        let horizon = cfg.horizon_s;
        let campus = gen_correlated_trace(&cfg.generator, horizon, seed)?;
        let bandwidth = link_traces(cfg, &topo, &campus)?;

        let h = &cfg.hazard;
        let mut mrng = stream(seed, label::HAZARD, 1);
        let spread = LogNormal::new(0.0, h.node_spread_sigma).map_err(|e| Error::Parse(e.to_string()))?;
        let mut multipliers: Vec<f64> = topo
            .nodes()
            .iter()
            .map(|n| if n.is_provider() { spread.sample(&mut mrng) } else { 0.0 })
            .collect();
        let providers = topo.providers().count() as f64;
        let mean = multipliers.iter().sum::<f64>() / providers;
        multipliers.iter_mut().for_each(|m| *m /= mean);

        let notice = notice_dist(cfg)?;
        // The campus series is the per-node reclaim intensity of all kinds.
        let sf = h.scheduled_fraction;
        let mut base = campus.lambda().clone();
        if let Some(t0) = h.drift_at_s {
            base = HazardTrace::new(base, sf, notice.clone())?.scaled_from(t0, h.drift_factor)?.rates().clone();
        }
        let hazards = multipliers
            .iter()
            .map(|&m| HazardTrace::new(base.map(|v| v * m), sf, notice.clone()))
            .collect::<Result<Vec<_>>>()?;

        let mut departures = Vec::new();
        for n in topo.providers() {
            let mut rng = stream(seed, label::DEPARTURES, n.id.0 as u64);
            let end = horizon.min(hazards[n.id.0 as usize].end());
            departures.extend(sample_departures_for(&hazards[n.id.0 as usize], n.id, 0.0, end, &mut rng)?);
        }
        departures.extend(bursts(cfg, &topo, &notice)?);
        departures.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.node.cmp(&b.node)));

        let jobs = job_specs(cfg)?;
        Ok(Self { topo, bandwidth, campus, hazards, multipliers, departures, jobs })
    }

    pub fn horizon(&self) -> f64 {
        self.bandwidth.iter().next().map(|(_, s)| s.end()).unwrap_or(0.0)
    }
}

/// Building-wide scheduled reclaims sharing one notice period.
fn bursts(cfg: &ScenarioConfig, topo: &Topology, notice: &NoticeDist) -> Result<Vec<DepartureEvent>> {
    let rate = cfg.hazard.burst_rate_per_h / 3600.0;
    let mut out = Vec::new();
    if rate <= 0.0 {
        return Ok(out);
    }
    let mut rng = stream(cfg.seed, label::BURSTS, 0);
    let gap = Exp::new(rate).map_err(|e| Error::Parse(e.to_string()))?;
    let buildings = topo.buildings();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= cfg.horizon_s {
            break;
        }
        let b = buildings[rng.random_range(0..buildings.len())];
        let tau = notice.sample(&mut rng);
        for n in topo.providers().filter(|n| n.building == b) {
            out.push(DepartureEvent { node: n.id, time_s: t, kind: DepartureKind::Scheduled, notice_s: tau });
        }
    }
    Ok(out)
}

/// Per-link availability: capacity x tier fraction x campus factor x jitter,
/// clipped to `[2%, 100%]` of capacity.
fn link_traces(cfg: &ScenarioConfig, topo: &Topology, campus: &CorrelatedTrace) -> Result<BandwidthTrace> {
    let b = &cfg.bandwidth;
    let factor = campus.b_eff().map(|v| v / cfg.generator.mean_bw);
    let jitter = LogNormal::new(0.0, b.jitter_sigma).map_err(|e| Error::Parse(e.to_string()))?;
    let mut series = Vec::with_capacity(topo.links().len());
    for link in topo.links() {
        let mut rng = stream(cfg.seed, label::BANDWIDTH, link.id.0 as u64);
        let (frac, coupling) = match link.tier {
            Tier::Access => (b.access_fraction, b.access_coupling),
            Tier::Distribution => (b.distribution_fraction, 1.0),
            Tier::Core => (b.core_fraction, 1.0),
        };
        let cap = link.capacity_bytes_per_s;
        let values = factor
            .values()
            .iter()
            .map(|g| (cap * frac * g.powf(coupling) * jitter.sample(&mut rng)).clamp(0.02 * cap, cap))
            .collect();
        series.push(Piecewise::new(factor.breakpoints().to_vec(), values)?);
    }
    BandwidthTrace::new(series)
}

fn job_specs(cfg: &ScenarioConfig) -> Result<Vec<JobSpec>> {
    let j = &cfg.jobs;
    let mut rng = stream(cfg.seed, label::JOBS, 0);
    let size = LogNormal::new(j.payload_median_bytes.ln(), j.payload_sigma).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((0..j.count)
        .map(|i| {
            let payload = size.sample(&mut rng).clamp(j.payload_min_bytes, j.payload_max_bytes);
            let restart_s = j.restart_min_s + rng.random::<f64>() * (j.restart_max_s - j.restart_min_s);
            let vram_bytes = j.vram_bytes[rng.random_range(0..j.vram_bytes.len())];
            JobSpec {
                id: JobId(i),
                payload,
                restart_s,
                loss_budget_s: j.loss_budget_s,
                vram_bytes,
                min_cuda: j.min_cuda,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_well_formed() {
        let cfg = ScenarioConfig::default();
        let s = Scenario::build(&cfg).unwrap();
        assert_eq!(s.jobs.len(), cfg.jobs.count as usize);
        assert_eq!(s.bandwidth.len(), s.topo.links().len());
        assert!(s.horizon() >= cfg.horizon_s);
        assert!(s.departures.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        let providers: Vec<usize> = s.topo.providers().map(|n| n.id.0 as usize).collect();
        let mean_m = providers.iter().map(|&i| s.multipliers[i]).sum::<f64>() / providers.len() as f64;
        assert!((mean_m - 1.0).abs() < 1e-12);
        // Expected signal count from the hazard integral, before dropping
        // signals that land on absent nodes.
        let expected: f64 = providers.iter().map(|&i| s.hazards[i].cumulative(0.0, cfg.horizon_s).0).sum();
        let n = s.departures.len() as f64;
        assert!((n - expected).abs() < 5.0 * expected.sqrt(), "{n} vs {expected}");
        for l in s.topo.links() {
            for v in s.bandwidth.series(l.id).unwrap().values() {
                assert!(*v > 0.0 && *v <= l.capacity_bytes_per_s);
            }
        }
    }

    #[test]
    fn same_seed_same_world() {
        let cfg = ScenarioConfig::default();
        let a = Scenario::build(&cfg).unwrap();
        let b = Scenario::build(&cfg).unwrap();
        assert_eq!(a.departures, b.departures);
        assert_eq!(a.jobs, b.jobs);
        assert_eq!(a.bandwidth, b.bandwidth);
    }

    #[test]
    fn bursts_hit_whole_buildings() {
        let mut cfg = ScenarioConfig::default();
        cfg.hazard.burst_rate_per_h = 2.0;
        let s = Scenario::build(&cfg).unwrap();
        let bursts = bursts(&cfg, &s.topo, &notice_dist(&cfg).unwrap()).unwrap();
        assert!(!bursts.is_empty());
        assert_eq!(bursts.len() % cfg.topology.nodes_per_building as usize, 0);
    }
}
