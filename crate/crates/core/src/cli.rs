//! Command-line front end. The binary only parses arguments and maps the
//! outcome to an exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::admission::{admit, stagger, BandwidthBudget};
use crate::checkpoint::{adaptivity_gap, cube_root_allocation, label_binding, water_fill_boxed, BoxedJob};
use crate::error::{Error, Result};
use crate::hazard::gen_correlated_trace;
use crate::io::{self, csv_writer};
use crate::model::generate_campus;
use crate::placement::{topo_select, SelectView};
use crate::rng::{label, stream};
use crate::sim::{run_scenario, sweep, ExperimentConfig, Policy, Scenario, SimReport, Verbosity};

/// Directory searched for `default.toml` when `--config` is not given, and
/// for relative config paths that do not exist as given.
pub const CONFIG_DIR_ENV: &str = "RECLAIMSIM_CONFIG_DIR";

#[derive(Debug, Parser)]
#[command(name = "reclaimsim", version, about = "Reclaim-aware migration toolkit and simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
}

#[derive(Debug, Args)]
pub struct Out {
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceKind {
    /// Campus-wide (hazard, bandwidth) samples.
    Joint,
    /// Available bandwidth per link.
    Links,
    /// Sampled reclaim signals for every provider.
    Departures,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the simulator for every configured seed.
    Simulate {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        policy: Option<Policy>,
        #[arg(long)]
        horizon_s: Option<f64>,
        /// Per-event log; a `_seed<N>` suffix is added for several seeds.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Run the configured grid over every seed.
    Sweep {
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Comma-separated seeds; overrides the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Per-cell mean and bootstrap intervals.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Predicted fixed-versus-adaptive ratio of a joint trace.
    Gap {
        trace: PathBuf,
        /// Local write speed, bytes/s; adds the share of network-bound samples.
        #[arg(long)]
        write_speed: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Split a checkpoint write budget across jobs.
    Allocate {
        jobs: PathBuf,
        #[arg(long)]
        budget: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Score migration destinations for one request.
    Select {
        request: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Admit migration flows on one bottleneck.
    Admit {
        flows: PathBuf,
        #[arg(long)]
        total: f64,
        #[arg(long, default_value_t = 0.0)]
        bmin: f64,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        now: f64,
        /// Spread admitted starts over this notice window.
        #[arg(long)]
        stagger_s: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Generate a trace file from the configured generator.
    GenTrace {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TraceKind::Joint)]
        kind: TraceKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Generate a campus topology file.
    GenTopo {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

/// What the process should report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    InvariantViolated,
}

/// Exit status for an error: 2 for bad input, 3 for anything else.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::Csv(_) | Error::Topology(_) | Error::Empty(_) => 2,
        _ => 3,
    }
}

/// Resolves the config: explicit path, then the env directory, then defaults.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
    match (path, dir) {
        (Some(p), Some(d)) if !p.exists() && p.is_relative() => ExperimentConfig::load(&d.join(p)),
        (Some(p), _) => ExperimentConfig::load(p),
        (None, Some(d)) if d.join("default.toml").exists() => ExperimentConfig::load(&d.join("default.toml")),
        (None, _) => Ok(ExperimentConfig::default()),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn seeded_log_path(path: &Path, seed: u64, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_seed{seed}.{ext}"))
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate { config, seed, policy, horizon_s, log, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(h) = horizon_s {
                cfg.horizon_s = h;
            }
            cfg.validate()?;
            let seeds = seed.map(|s| vec![s]).unwrap_or_else(|| cfg.seed_list());
            let log = log.or(cfg.output.log.clone());
            let mut reports = Vec::with_capacity(seeds.len());
            for &s in &seeds {
                let mut sc = cfg.scenario();
                sc.seed = s;
                let world = Scenario::build(&sc)?;
                let r = run_scenario(&sc, &world)?;
                if let Some(l) = &log {
                    r.write_log(sink(Some(&seeded_log_path(l, s, seeds.len() > 1)))?)?;
                }
                if cfg.verbosity != Verbosity::Quiet {
                    eprintln!(
                        "{} seed {}: work loss {:.3} GPU-h, median downtime {:.1} s, handoff success {:.1}%, degradation {:.2}%",
                        r.policy, r.seed, r.work_loss_gpu_h, r.downtime_median_s, r.migration_success_pct, r.traffic_degradation_pct
                    );
                }
                reports.push(r);
            }
            let path = out.output.or(cfg.output.results.clone());
            SimReport::write_csv(&reports, sink(path.as_deref())?)?;
            Ok(if reports.iter().any(SimReport::invariant_violated) { Outcome::InvariantViolated } else { Outcome::Ok })
        }
        Command::Sweep { config, seeds, summary, out } => {
            let cfg = load_config(config.as_deref())?;
            let seeds = if seeds.is_empty() { cfg.seed_list() } else { seeds };
            let table = sweep(&cfg.scenario(), &cfg.sweep, &seeds)?;
            let path = out.output.or(cfg.output.results.clone());
            table.write_rows(sink(path.as_deref())?)?;
            if let Some(p) = summary.or(cfg.output.summary.clone()) {
                table.write_summary(sink(Some(&p))?)?;
            }
            if cfg.verbosity != Verbosity::Quiet {
                let failed = table.rows.iter().filter(|r| r.status != "ok").count();
                eprintln!("{} runs, {} failed, spread {:.1}%", table.rows.len(), failed, 100.0 * table.flatness());
            }
            Ok(if table.invariant_violated() { Outcome::InvariantViolated } else { Outcome::Ok })
        }
        Command::Gap { trace, write_speed, out } => {
            let samples = io::read_joint_trace(&trace)?;
            let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.lambda, s.b_eff)).collect();
            let g = adaptivity_gap(&pairs)?;
            let mut w = csv_writer(sink(out.output.as_deref())?)?;
            let mut header = vec!["samples", "mean_lambda_per_s", "mean_theta_s_per_byte", "mean_w", "cs_defect", "predicted_ratio"];
            let mut row = vec![
                g.samples.to_string(),
                g.mean_lambda.to_string(),
                g.mean_theta.to_string(),
                g.mean_w.to_string(),
                g.cs_defect.to_string(),
                g.predicted_ratio.to_string(),
            ];
            if let Some(ws) = write_speed {
                let b: Vec<f64> = samples.iter().map(|s| s.b_eff).collect();
                let bound = label_binding(&b, ws).iter().filter(|x| **x).count();
                header.push("network_bound_fraction");
                row.push((bound as f64 / b.len() as f64).to_string());
            }
            w.write_record(&header)?;
            w.write_record(&row)?;
            w.flush()?;
            Ok(Outcome::Ok)
        }
        Command::Allocate { jobs, budget, out } => {
            let jobs = io::read_jobs(&jobs)?;
            let rates = if jobs.iter().any(|j| j.cap_bytes_per_s.is_some()) {
                let boxed: Vec<BoxedJob> = jobs
                    .iter()
                    .map(|j| BoxedJob {
                        lambda: j.lambda_per_s,
                        payload: j.payload_bytes,
                        cap: j.cap_bytes_per_s.unwrap_or(f64::INFINITY),
                    })
                    .collect();
                water_fill_boxed(&boxed, budget)?.rates
            } else {
                let pairs: Vec<(f64, f64)> = jobs.iter().map(|j| (j.lambda_per_s, j.payload_bytes)).collect();
                cube_root_allocation(&pairs, budget)?
            };
            let mut w = csv_writer(sink(out.output.as_deref())?)?;
            w.write_record(jobs.iter().map(|j| format!("job_{}", j.job_id)))?;
            w.write_record(rates.iter().map(|r| r.to_string()))?;
            w.flush()?;
            Ok(Outcome::Ok)
        }
        Command::Select { request, out } => {
            let (file, base) = io::SelectRequestFile::load(&request)?;
            let inp = file.resolve(&base)?;
            let view = SelectView {
                topo: &inp.topo,
                bandwidth: &inp.bandwidth,
                hazards: &inp.hazards,
                loads: inp.loads.as_deref(),
                online: None,
            };
            let sel = topo_select(&view, &inp.request, &inp.params)?;
            let mut w = csv_writer(sink(out.output.as_deref())?)?;
            w.write_record(["dest", "t_mig_s", "survival", "score_s", "feasible", "same_building", "winner"])?;
            for c in &sel.table {
                w.write_record([
                    c.dest.0.to_string(),
                    c.t_mig_s.to_string(),
                    c.survival.to_string(),
                    c.score_s.to_string(),
                    c.feasible.to_string(),
                    c.same_building.to_string(),
                    (sel.winner == Some(c.dest)).to_string(),
                ])?;
            }
            w.flush()?;
            Ok(Outcome::Ok)
        }
        Command::Admit { flows, total, bmin, beta, now, stagger_s, out } => {
            let flows = io::read_flows(&flows)?;
            let budget = BandwidthBudget::new(total, bmin, beta)?;
            let mut adm = admit(&flows, &budget, now);
            if let Some(win) = stagger_s {
                stagger(&mut adm.admitted, win);
            }
            let mut w = csv_writer(sink(out.output.as_deref())?)?;
            w.write_record(["flow_id", "status", "class", "dscp", "min_rate", "assigned_rate", "start_offset_s"])?;
            let mut rows: Vec<_> = adm.admitted.iter().chain(&adm.degraded).collect();
            rows.sort_by_key(|f| f.id);
            for f in rows {
                w.write_record([
                    f.id.0.to_string(),
                    f.status.as_str().to_string(),
                    f.class.as_str().to_string(),
                    f.class.dscp().to_string(),
                    f.min_rate.to_string(),
                    f.assigned_rate.to_string(),
                    f.start_offset_s.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(Outcome::Ok)
        }
        Command::GenTrace { config, kind, seed, output } => {
            let cfg = load_config(config.as_deref())?;
            let mut sc = cfg.scenario();
            if let Some(s) = seed {
                sc.seed = s;
            }
            match kind {
                TraceKind::Joint => {
                    let t = gen_correlated_trace(&sc.generator, sc.horizon_s, sc.seed)?;
                    io::write_joint_trace(&t.samples(), &output)?;
                }
                TraceKind::Links => io::write_link_traces(&Scenario::build(&sc)?.bandwidth, &output)?,
                TraceKind::Departures => io::write_departures(&Scenario::build(&sc)?.departures, &output)?,
            }
            Ok(Outcome::Ok)
        }
        Command::GenTopo { config, seed, output } => {
            let cfg = load_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let topo = generate_campus(&cfg.topology, &mut stream(seed, label::TOPOLOGY, 0))?;
            io::write_topology(&topo, &output)?;
            Ok(Outcome::Ok)
        }
    }
}
