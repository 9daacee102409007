//! Scenario configuration, loaded from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::GeneratorParams;
use crate::model::CampusParams;
use crate::sim::sweep::SweepGrid;
use crate::units::{GB, GBPS, MB, MBPS};

/// Policy under test. The `p*` variants are protocol subsets: a missing P1
/// falls back to a 30 min fixed interval, a missing P2 to random
/// destinations, a missing P3 to unshaped fair sharing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Reclaimnet,
    StaticCkpt,
    TvFixed,
    RandomDst,
    NoTcbpf,
    NoMigration,
    OracleTiny,
    AllOff,
    P1Only,
    P2Only,
    P3Only,
    P1P2,
    P1P3,
    P2P3,
}

impl Policy {
    pub const ONLINE: [Policy; 6] = [
        Policy::Reclaimnet,
        Policy::TvFixed,
        Policy::RandomDst,
        Policy::NoTcbpf,
        Policy::StaticCkpt,
        Policy::NoMigration,
    ];

    pub const SUBSETS: [Policy; 8] = [
        Policy::AllOff,
        Policy::P1Only,
        Policy::P2Only,
        Policy::P3Only,
        Policy::P1P2,
        Policy::P1P3,
        Policy::P2P3,
        Policy::Reclaimnet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Reclaimnet => "reclaimnet",
            Policy::StaticCkpt => "static_ckpt",
            Policy::TvFixed => "tv_fixed",
            Policy::RandomDst => "random_dst",
            Policy::NoTcbpf => "no_tcbpf",
            Policy::NoMigration => "no_migration",
            Policy::OracleTiny => "oracle_tiny",
            Policy::AllOff => "all_off",
            Policy::P1Only => "p1_only",
            Policy::P2Only => "p2_only",
            Policy::P3Only => "p3_only",
            Policy::P1P2 => "p1_p2",
            Policy::P1P3 => "p1_p3",
            Policy::P2P3 => "p2_p3",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Policy::ONLINE.iter().chain(Policy::SUBSETS.iter()).chain([Policy::OracleTiny].iter());
        all.copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config("policy", format!("unknown policy `{s}`")))
    }
}

/// Departure process around the generated campus hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HazardConfig {
    /// Share of departures that arrive with notice.
    pub scheduled_fraction: f64,
    pub notice_median_s: f64,
    pub notice_sigma: f64,
    pub notice_floor_s: f64,
    /// Log-scale spread of per-node hazard multipliers (0 = identical nodes).
    pub node_spread_sigma: f64,
    /// Mean time a departed node stays away.
    pub return_mean_s: f64,
    /// Building-wide scheduled departures per hour (lab sessions).
    pub burst_rate_per_h: f64,
    /// Optional hazard multiplier applied from `drift_at_s` on.
    pub drift_at_s: Option<f64>,
    pub drift_factor: f64,
}

impl Default for HazardConfig {
    fn default() -> Self {
        Self {
            scheduled_fraction: 0.58,
            notice_median_s: 120.0,
            notice_sigma: 0.8,
            notice_floor_s: 10.0,
            node_spread_sigma: 0.5,
            return_mean_s: 600.0,
            burst_rate_per_h: 0.25,
            drift_at_s: None,
            drift_factor: 1.7,
        }
    }
}

/// Link availability model: capacity times a tier fraction times the
/// campus-wide bandwidth factor times per-link jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandwidthConfig {
    pub access_fraction: f64,
    pub distribution_fraction: f64,
    pub core_fraction: f64,
    /// Exponent applied to the campus factor on access links.
    pub access_coupling: f64,
    pub jitter_sigma: f64,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            access_fraction: 0.82,
            distribution_fraction: 0.30,
            core_fraction: 0.50,
            access_coupling: 0.5,
            jitter_sigma: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JobMix {
    pub count: u32,
    pub payload_median_bytes: f64,
    pub payload_sigma: f64,
    pub payload_min_bytes: f64,
    pub payload_max_bytes: f64,
    pub restart_min_s: f64,
    pub restart_max_s: f64,
    pub loss_budget_s: f64,
    /// Remaining-runtime estimate used for destination survival.
    pub remaining_runtime_s: f64,
    /// VRAM requirements drawn uniformly from this list.
    pub vram_bytes: Vec<f64>,
    pub min_cuda: f64,
}

impl Default for JobMix {
    fn default() -> Self {
        Self {
            count: 20,
            payload_median_bytes: 3.2 * GB,
            payload_sigma: 0.6,
            payload_min_bytes: 120.0 * MB,
            payload_max_bytes: 48.0 * GB,
            restart_min_s: 10.0,
            restart_max_s: 40.0,
            loss_budget_s: 1800.0,
            remaining_runtime_s: 3600.0,
            vram_bytes: vec![8.0 * GB, 16.0 * GB, 22.0 * GB, 40.0 * GB],
            min_cuda: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Checkpoint write share.
    pub beta_p1: f64,
    /// Onward-migration weight in destination scores.
    pub alpha: f64,
    /// Research reservation share.
    pub beta_p3: f64,
    pub b_min_bytes_per_s: f64,
    pub epoch_s: f64,
    pub k_min: usize,
    pub theta_load: f64,
    pub static_interval_s: f64,
    /// Interval used when P1 is disabled in protocol subsets.
    pub naive_interval_s: f64,
    pub no_migration_interval_s: f64,
    pub hazard_window_s: f64,
    pub bandwidth_window_s: f64,
    /// Estimation window of the time-varying fixed-interval baseline.
    pub tv_window_s: f64,
    pub confidence: f64,
    /// Fair-share weight of an unshaped transfer against one research aggregate.
    pub transfer_weight: f64,
    pub kill_latency_s: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            beta_p1: 0.2,
            alpha: 1.0,
            beta_p3: 0.3,
            b_min_bytes_per_s: 300.0 * MBPS,
            epoch_s: 600.0,
            k_min: 2,
            theta_load: 0.8,
            static_interval_s: 600.0,
            naive_interval_s: 1800.0,
            no_migration_interval_s: 1800.0,
            hazard_window_s: 3600.0,
            bandwidth_window_s: 3600.0,
            tv_window_s: 86_400.0,
            confidence: 0.95,
            transfer_weight: 4.0,
            kill_latency_s: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon_s: f64,
    pub policy: Policy,
    /// Topology file; overrides `[topology]` when set.
    pub topology_file: Option<PathBuf>,
    pub topology: CampusParams,
    pub generator: GeneratorParams,
    pub hazard: HazardConfig,
    pub bandwidth: BandwidthConfig,
    pub jobs: JobMix,
    pub knobs: Knobs,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let topology = CampusParams { store_bytes_per_s: 10.0 * GBPS, ..CampusParams::default() };
        Self {
            seed: 1,
            horizon_s: 86_400.0,
            policy: Policy::Reclaimnet,
            topology_file: None,
            topology,
            generator: GeneratorParams { ar_phi: 0.97, ..GeneratorParams::default() },
            hazard: HazardConfig::default(),
            bandwidth: BandwidthConfig::default(),
            jobs: JobMix::default(),
            knobs: Knobs::default(),
        }
    }
}

fn check(ok: bool, path: &str, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, msg))
    }
}

fn positive(v: f64, path: &str) -> Result<()> {
    check(v > 0.0 && v.is_finite(), path, format!("must be positive, got {v}"))
}

fn fraction(v: f64, path: &str) -> Result<()> {
    check(v > 0.0 && v <= 1.0, path, format!("must be in (0, 1], got {v}"))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| locate(text, s.start)).unwrap_or_default();
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative file references resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(f) = &cfg.topology_file {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.topology_file = Some(base.join(f));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.horizon_s, "horizon_s")?;
        if let Some(f) = &self.topology_file {
            check(f.exists(), "topology_file", format!("`{}` not found", f.display()))?;
        }
        let t = &self.topology;
        check(t.buildings > 0, "topology.buildings", "must be at least 1")?;
        check(t.nodes_per_building > 0, "topology.nodes_per_building", "must be at least 1")?;
        positive(t.access_bytes_per_s, "topology.access_bytes_per_s")?;
        check(self.topology_file.is_some() || t.store_bytes_per_s > 0.0, "topology.store_bytes_per_s", "the simulator needs building stores")?;

        let g = &self.generator;
        positive(g.mean_lambda, "generator.mean_lambda")?;
        positive(g.mean_bw, "generator.mean_bw")?;
        positive(g.bucket_s, "generator.bucket_s")?;
        check(g.target_corr > -1.0 && g.target_corr < 1.0, "generator.target_corr", "must be in (-1, 1)")?;
        check(g.cv_lambda >= 0.0, "generator.cv_lambda", "must be non-negative")?;
        check(g.cv_inv_bw >= 0.0, "generator.cv_inv_bw", "must be non-negative")?;
        check((0.0..1.0).contains(&g.ar_phi), "generator.ar_phi", "must be in [0, 1)")?;

        let h = &self.hazard;
        check((0.0..=1.0).contains(&h.scheduled_fraction), "hazard.scheduled_fraction", "must be in [0, 1]")?;
        positive(h.notice_median_s, "hazard.notice_median_s")?;
        check(h.notice_sigma >= 0.0, "hazard.notice_sigma", "must be non-negative")?;
        positive(h.notice_floor_s, "hazard.notice_floor_s")?;
        check(h.node_spread_sigma >= 0.0, "hazard.node_spread_sigma", "must be non-negative")?;
        positive(h.return_mean_s, "hazard.return_mean_s")?;
        check(h.burst_rate_per_h >= 0.0, "hazard.burst_rate_per_h", "must be non-negative")?;
        if let Some(d) = h.drift_at_s {
            check(d >= 0.0 && d < self.horizon_s, "hazard.drift_at_s", "must lie inside the horizon")?;
        }
        positive(h.drift_factor, "hazard.drift_factor")?;

        let b = &self.bandwidth;
        fraction(b.access_fraction, "bandwidth.access_fraction")?;
        fraction(b.distribution_fraction, "bandwidth.distribution_fraction")?;
        fraction(b.core_fraction, "bandwidth.core_fraction")?;
        check(b.access_coupling >= 0.0, "bandwidth.access_coupling", "must be non-negative")?;
        check(b.jitter_sigma >= 0.0, "bandwidth.jitter_sigma", "must be non-negative")?;

        let j = &self.jobs;
        check(j.count > 0, "jobs.count", "must be at least 1")?;
        positive(j.payload_median_bytes, "jobs.payload_median_bytes")?;
        check(j.payload_sigma >= 0.0, "jobs.payload_sigma", "must be non-negative")?;
        positive(j.payload_min_bytes, "jobs.payload_min_bytes")?;
        check(j.payload_max_bytes >= j.payload_min_bytes, "jobs.payload_max_bytes", "must be at least payload_min_bytes")?;
        check(j.restart_min_s >= 0.0, "jobs.restart_min_s", "must be non-negative")?;
        check(j.restart_max_s >= j.restart_min_s, "jobs.restart_max_s", "must be at least restart_min_s")?;
        positive(j.loss_budget_s, "jobs.loss_budget_s")?;
        positive(j.remaining_runtime_s, "jobs.remaining_runtime_s")?;
        check(!j.vram_bytes.is_empty(), "jobs.vram_bytes", "must not be empty")?;
        for (i, v) in j.vram_bytes.iter().enumerate() {
            positive(*v, &format!("jobs.vram_bytes[{i}]"))?;
        }

        let k = &self.knobs;
        check(k.beta_p1 > 0.0 && k.beta_p1 < 1.0, "knobs.beta_p1", "must be in (0, 1)")?;
        check(k.alpha >= 0.0, "knobs.alpha", "must be non-negative")?;
        check(k.beta_p3 >= 0.0 && k.beta_p3 < 1.0, "knobs.beta_p3", "must be in [0, 1)")?;
        check(k.b_min_bytes_per_s >= 0.0, "knobs.b_min_bytes_per_s", "must be non-negative")?;
        check(k.b_min_bytes_per_s < t.access_bytes_per_s, "knobs.b_min_bytes_per_s", "must leave migration capacity on access links")?;
        positive(k.epoch_s, "knobs.epoch_s")?;
        check(k.k_min >= 1, "knobs.k_min", "must be at least 1")?;
        check(k.theta_load > 0.0 && k.theta_load <= 1.0, "knobs.theta_load", "must be in (0, 1]")?;
        positive(k.static_interval_s, "knobs.static_interval_s")?;
        positive(k.naive_interval_s, "knobs.naive_interval_s")?;
        positive(k.no_migration_interval_s, "knobs.no_migration_interval_s")?;
        positive(k.hazard_window_s, "knobs.hazard_window_s")?;
        positive(k.bandwidth_window_s, "knobs.bandwidth_window_s")?;
        positive(k.tv_window_s, "knobs.tv_window_s")?;
        check(k.confidence > 0.0 && k.confidence < 1.0, "knobs.confidence", "must be in (0, 1)")?;
        positive(k.transfer_weight, "knobs.transfer_weight")?;
        check(k.kill_latency_s >= 0.0, "knobs.kill_latency_s", "must be non-negative")?;
        Ok(())
    }
}

/// Where a run writes its tables; unset paths go to stdout or nowhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub results: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Summary,
    /// Also keep the per-event log.
    Events,
}

/// Scenario fields plus sweep grid, seed list, outputs and verbosity, all at
/// the top level of one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub horizon_s: f64,
    pub policy: Policy,
    pub topology_file: Option<PathBuf>,
    /// Seeds for replication; empty means just `seed`.
    pub seeds: Vec<u64>,
    pub verbosity: Verbosity,
    pub topology: CampusParams,
    pub generator: GeneratorParams,
    pub hazard: HazardConfig,
    pub bandwidth: BandwidthConfig,
    pub jobs: JobMix,
    pub knobs: Knobs,
    pub sweep: SweepGrid,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_scenario(ScenarioConfig::default())
    }
}

impl ExperimentConfig {
    pub fn from_scenario(s: ScenarioConfig) -> Self {
        Self {
            seed: s.seed,
            horizon_s: s.horizon_s,
            policy: s.policy,
            topology_file: s.topology_file,
            seeds: Vec::new(),
            verbosity: Verbosity::default(),
            topology: s.topology,
            generator: s.generator,
            hazard: s.hazard,
            bandwidth: s.bandwidth,
            jobs: s.jobs,
            knobs: s.knobs,
            sweep: SweepGrid::default(),
            output: OutputPaths::default(),
        }
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            seed: self.seed,
            horizon_s: self.horizon_s,
            policy: self.policy,
            topology_file: self.topology_file.clone(),
            topology: self.topology.clone(),
            generator: self.generator.clone(),
            hazard: self.hazard.clone(),
            bandwidth: self.bandwidth.clone(),
            jobs: self.jobs.clone(),
            knobs: self.knobs.clone(),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| locate(text, s.start)).unwrap_or_default();
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative paths inside resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| {
            let at = e.span().map(|s| locate(&text, s.start)).unwrap_or_default();
            Error::config(at, e.message().to_string())
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(f) = p.as_mut().filter(|f| f.is_relative()) {
                *f = base.join(&*f);
            }
        };
        let mut cfg = cfg;
        rebase(&mut cfg.topology_file);
        rebase(&mut cfg.output.results);
        rebase(&mut cfg.output.summary);
        rebase(&mut cfg.output.log);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        self.sweep.validate()?;
        let base = self.scenario();
        let axes: [(&str, &Vec<f64>, fn(&mut ScenarioConfig, f64)); 3] = [
            ("beta_p1", &self.sweep.beta_p1, |c, v| c.knobs.beta_p1 = v),
            ("alpha", &self.sweep.alpha, |c, v| c.knobs.alpha = v),
            ("beta_p3", &self.sweep.beta_p3, |c, v| c.knobs.beta_p3 = v),
        ];
        for (name, values, set) in axes {
            for (i, &v) in values.iter().enumerate() {
                let mut c = base.clone();
                set(&mut c, v);
                c.validate().map_err(|e| match e {
                    Error::Config { msg, .. } => Error::config(format!("sweep.{name}[{i}]"), msg),
                    e => e,
                })?;
            }
        }
        Ok(())
    }
}

/// Dotted key path of the table entry enclosing byte offset `at`.
fn locate(text: &str, at: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if offset > at {
            break;
        }
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

/// Stress scenario: heavy lab bursts and research load near the reservation.
pub fn stress_scenario(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig { seed, horizon_s: 21_600.0, ..ScenarioConfig::default() };
    cfg.hazard.burst_rate_per_h = 1.0;
    cfg.hazard.notice_median_s = 240.0;
    cfg.bandwidth.access_fraction = 0.80;
    cfg
}
