//! Parameter sweeps over the controller knobs with seed replication.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{label, stream};
use crate::sim::config::{Policy, ScenarioConfig};
use crate::sim::engine::run_scenario;
use crate::sim::report::SimReport;
use crate::sim::scenario::Scenario;

/// Cartesian grid over the three controller shares and the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub policies: Vec<Policy>,
    pub beta_p1: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta_p3: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            policies: vec![Policy::Reclaimnet],
            beta_p1: vec![0.1, 0.2, 0.3],
            alpha: vec![0.5, 1.0, 2.0],
            beta_p3: vec![0.2, 0.3, 0.4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub policy: Policy,
    pub beta_p1: f64,
    pub alpha: f64,
    pub beta_p3: f64,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &beta_p1 in &self.beta_p1 {
                for &alpha in &self.alpha {
                    for &beta_p3 in &self.beta_p3 {
                        out.push(Cell { index: out.len(), policy, beta_p1, alpha, beta_p3 });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (name, len) in [
            ("sweep.policies", self.policies.len()),
            ("sweep.beta_p1", self.beta_p1.len()),
            ("sweep.alpha", self.alpha.len()),
            ("sweep.beta_p3", self.beta_p3.len()),
        ] {
            if len == 0 {
                return Err(Error::config(name, "grid axis must not be empty"));
            }
        }
        if let Some(i) = self.policies.iter().position(|p| *p == Policy::OracleTiny) {
            return Err(Error::config(format!("sweep.policies[{i}]"), "oracle_tiny only runs on tiny instances"));
        }
        Ok(())
    }
}

impl Cell {
    pub fn apply(&self, base: &ScenarioConfig, seed: u64) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.policy = self.policy;
        cfg.knobs.beta_p1 = self.beta_p1;
        cfg.knobs.alpha = self.alpha;
        cfg.knobs.beta_p3 = self.beta_p3;
        cfg
    }
}

/// One run of one cell. Metrics are empty on a failed row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub policy: Policy,
    pub beta_p1: f64,
    pub alpha: f64,
    pub beta_p3: f64,
    pub seed: u64,
    pub status: &'static str,
    pub error: String,
    pub work_loss_gpu_h: Option<f64>,
    pub rollback_gpu_h: Option<f64>,
    pub downtime_median_s: Option<f64>,
    pub migration_success_pct: Option<f64>,
    pub traffic_degradation_pct: Option<f64>,
    pub deadline_violations: Option<u64>,
    pub isolation_violations: Option<u64>,
    pub conservation_error_s: Option<f64>,
    #[serde(skip)]
    pub invariant_violated: bool,
}

impl SweepRow {
    fn new(cell: &Cell, seed: u64, outcome: std::result::Result<SimReport, String>) -> Self {
        let mut row = Self {
            cell: cell.index,
            policy: cell.policy,
            beta_p1: cell.beta_p1,
            alpha: cell.alpha,
            beta_p3: cell.beta_p3,
            seed,
            status: "ok",
            error: String::new(),
            work_loss_gpu_h: None,
            rollback_gpu_h: None,
            downtime_median_s: None,
            migration_success_pct: None,
            traffic_degradation_pct: None,
            deadline_violations: None,
            isolation_violations: None,
            conservation_error_s: None,
            invariant_violated: false,
        };
        match outcome {
            Ok(r) => {
                row.work_loss_gpu_h = Some(r.work_loss_gpu_h);
                row.rollback_gpu_h = Some(r.rollback_gpu_h);
                row.downtime_median_s = Some(r.downtime_median_s);
                row.migration_success_pct = Some(r.migration_success_pct);
                row.traffic_degradation_pct = Some(r.traffic_degradation_pct);
                row.deadline_violations = Some(r.deadline_violations);
                row.isolation_violations = Some(r.isolation_violations);
                row.conservation_error_s = Some(r.conservation_error_s);
                row.invariant_violated = r.invariant_violated();
            }
            Err(e) => {
                row.status = "failed";
                row.error = e;
            }
        }
        row
    }
}

/// Mean and percentile-bootstrap interval of one metric over a cell's seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub policy: Policy,
    pub beta_p1: f64,
    pub alpha: f64,
    pub beta_p3: f64,
    pub runs: usize,
    pub failed: usize,
    pub work_loss_mean: f64,
    pub work_loss_ci_lo: f64,
    pub work_loss_ci_hi: f64,
    pub downtime_median_mean: f64,
    pub downtime_median_ci_lo: f64,
    pub downtime_median_ci_hi: f64,
    pub degradation_mean: f64,
    pub degradation_ci_lo: f64,
    pub degradation_ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
}

impl SweepTable {
    pub fn invariant_violated(&self) -> bool {
        self.rows.iter().any(|r| r.invariant_violated)
    }

    pub fn write_rows<W: Write>(&self, w: W) -> Result<()> {
        let mut w = crate::io::csv_writer(w)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = crate::io::csv_writer(w)?;
        for c in &self.cells {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Cell with the smallest mean work loss.
    pub fn argmin_work_loss(&self) -> Option<&CellSummary> {
        self.cells.iter().filter(|c| c.runs > c.failed).min_by(|a, b| a.work_loss_mean.total_cmp(&b.work_loss_mean))
    }

    /// Largest relative deviation of a cell's mean work loss from the grid mean.
    pub fn flatness(&self) -> f64 {
        let means: Vec<f64> = self.cells.iter().filter(|c| c.runs > c.failed).map(|c| c.work_loss_mean).collect();
        if means.is_empty() {
            return 0.0;
        }
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        if grand == 0.0 {
            return 0.0;
        }
        means.iter().map(|m| (m - grand).abs() / grand).fold(0.0, f64::max)
    }
}

/// Percentile bootstrap of the mean.
pub fn bootstrap_mean(samples: &[f64], resamples: usize, level: f64, seed: u64) -> Estimate {
    if samples.is_empty() {
        return Estimate { mean: f64::NAN, lo: f64::NAN, hi: f64::NAN };
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut rng = stream(seed, label::EXPERIMENT, 1);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64) as usize).min(resamples - 1)];
    Estimate { mean, lo: at(tail), hi: at(1.0 - tail) }
}

const RESAMPLES: usize = 1000;

fn summarize(cell: &Cell, rows: &[SweepRow]) -> CellSummary {
    let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.cell == cell.index).collect();
    let pick = |f: fn(&SweepRow) -> Option<f64>| -> Estimate {
        let v: Vec<f64> = mine.iter().filter_map(|r| f(r)).collect();
        bootstrap_mean(&v, RESAMPLES, 0.95, cell.index as u64)
    };
    let wl = pick(|r| r.work_loss_gpu_h);
    let dt = pick(|r| r.downtime_median_s);
    let dg = pick(|r| r.traffic_degradation_pct);
    CellSummary {
        cell: cell.index,
        policy: cell.policy,
        beta_p1: cell.beta_p1,
        alpha: cell.alpha,
        beta_p3: cell.beta_p3,
        runs: mine.len(),
        failed: mine.iter().filter(|r| r.status != "ok").count(),
        work_loss_mean: wl.mean,
        work_loss_ci_lo: wl.lo,
        work_loss_ci_hi: wl.hi,
        downtime_median_mean: dt.mean,
        downtime_median_ci_lo: dt.lo,
        downtime_median_ci_hi: dt.hi,
        degradation_mean: dg.mean,
        degradation_ci_lo: dg.lo,
        degradation_ci_hi: dg.hi,
    }
}

fn guarded<T>(f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "run panicked".into())),
    }
}

/// Runs every cell for every seed. The world of a seed is built once and
/// shared by all cells; a failing run becomes a failed row.
pub fn sweep(base: &ScenarioConfig, grid: &SweepGrid, seeds: &[u64]) -> Result<SweepTable> {
    grid.validate()?;
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let cells = grid.cells();
    let mut rows: Vec<SweepRow> = seeds
        .par_iter()
        .flat_map_iter(|&seed| {
            let mut world_cfg = base.clone();
            world_cfg.seed = seed;
            let world = guarded(|| Scenario::build(&world_cfg));
            cells
                .iter()
                .map(|cell| {
                    let outcome = match &world {
                        Ok(sc) => {
                            let cfg = cell.apply(base, seed);
                            guarded(|| {
                                cfg.validate()?;
                                run_scenario(&cfg, sc)
                            })
                        }
                        Err(e) => Err(e.clone()),
                    };
                    SweepRow::new(cell, seed, outcome)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    rows.sort_by_key(|r| (r.cell, seeds.iter().position(|s| *s == r.seed)));
    let summaries = cells.iter().map(|c| summarize(c, &rows)).collect();
    Ok(SweepTable { rows, cells: summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> ScenarioConfig {
        let mut cfg = ScenarioConfig { horizon_s: 3600.0, ..ScenarioConfig::default() };
        cfg.jobs.count = 6;
        cfg
    }

    #[test]
    fn full_grid_with_five_seeds_has_135_rows() {
        let table = sweep(&short(), &SweepGrid::default(), &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(table.rows.len(), 135);
        assert_eq!(table.cells.len(), 27);
        assert!(table.rows.iter().all(|r| r.status == "ok"), "{:?}", table.rows.iter().find(|r| r.status != "ok"));
        assert!(table.cells.iter().all(|c| c.runs == 5 && c.work_loss_ci_lo <= c.work_loss_mean));
        assert!(!table.invariant_violated());
        let mut buf = Vec::new();
        table.write_rows(&mut buf).unwrap();
        assert_eq!(crate::io::csv_reader(buf.as_slice()).records().count(), 135);
    }

    #[test]
    fn failing_cells_become_failed_rows() {
        let grid = SweepGrid { beta_p1: vec![0.2, 1.5], alpha: vec![1.0], beta_p3: vec![0.3], ..SweepGrid::default() };
        let table = sweep(&short(), &grid, &[1, 2]).unwrap();
        assert_eq!(table.rows.len(), 4);
        let failed: Vec<_> = table.rows.iter().filter(|r| r.status == "failed").collect();
        assert_eq!(failed.len(), 2);
        assert!(failed.iter().all(|r| r.beta_p1 == 1.5 && r.error.contains("beta_p1") && r.work_loss_gpu_h.is_none()));
        assert_eq!(table.cells[1].failed, 2);
        assert_eq!(table.argmin_work_loss().unwrap().beta_p1, 0.2);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let grid = SweepGrid { alpha: vec![], ..SweepGrid::default() };
        assert!(matches!(sweep(&short(), &grid, &[1]), Err(Error::Config { .. })));
        assert!(matches!(sweep(&short(), &SweepGrid::default(), &[]), Err(Error::Config { .. })));
    }

    #[test]
    fn bootstrap_brackets_the_mean() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let e = bootstrap_mean(&xs, 2000, 0.95, 3);
        assert!((e.mean - 19.5).abs() < 1e-12);
        assert!(e.lo < e.mean && e.mean < e.hi);
        // standard error ~1.83, so the 95% interval is about +-3.6
        assert!((e.hi - e.lo - 7.2).abs() < 1.5, "{e:?}");
        let one = bootstrap_mean(&[2.0], 100, 0.95, 0);
        assert_eq!((one.lo, one.hi), (2.0, 2.0));
    }
}
