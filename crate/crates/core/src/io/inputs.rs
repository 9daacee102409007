use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{create, csv_reader, csv_writer, open};
use crate::admission::{FlowId, MigrationFlow, TrafficClass};
use crate::error::{Error, Result};
use crate::hazard::HazardTrace;
use crate::model::{generate_campus, BandwidthTrace, CampusParams, JobId, NodeId, Piecewise, Topology};
use crate::placement::{MigrationRequest, SelectParams};
use crate::rng::{label, stream};

/// A row of the allocation input: hazard, payload and an optional rate cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocJob {
    pub job_id: u32,
    pub lambda_per_s: f64,
    pub payload_bytes: f64,
    pub cap_bytes_per_s: Option<f64>,
}

pub fn read_jobs(path: &Path) -> Result<Vec<AllocJob>> {
    let rows = csv_reader(open(path)?).deserialize().collect::<std::result::Result<Vec<AllocJob>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Empty("job list"));
    }
    Ok(rows)
}

pub fn write_jobs(jobs: &[AllocJob], path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?)?;
    for j in jobs {
        w.serialize(j)?;
    }
    w.flush()?;
    Ok(())
}

/// Flow request row. The short headers `C_bytes`, `tau_s` and `Tr_s` are
/// accepted too; `job_id` defaults to the flow id and `arrival_s` to zero.
#[derive(Serialize, Deserialize)]
struct FlowRow {
    flow_id: u64,
    #[serde(default)]
    job_id: Option<u32>,
    src: u32,
    dst: u32,
    #[serde(alias = "C_bytes")]
    payload_bytes: f64,
    #[serde(alias = "tau_s")]
    notice_s: f64,
    #[serde(alias = "Tr_s")]
    restart_s: f64,
    class: String,
    #[serde(default)]
    arrival_s: f64,
    #[serde(default)]
    path_cap_bytes_per_s: Option<f64>,
}

pub fn read_flows(path: &Path) -> Result<Vec<MigrationFlow>> {
    let mut out = Vec::new();
    for row in csv_reader(open(path)?).deserialize() {
        let r: FlowRow = row?;
        let class: TrafficClass = r.class.parse()?;
        let mut f = MigrationFlow::new(
            FlowId(r.flow_id),
            JobId(r.job_id.unwrap_or(r.flow_id as u32)),
            NodeId(r.src),
            NodeId(r.dst),
            r.payload_bytes,
            r.notice_s,
            r.restart_s,
            class,
            r.arrival_s,
        );
        if let Some(c) = r.path_cap_bytes_per_s {
            f.path_cap = c;
        }
        out.push(f);
    }
    Ok(out)
}

pub fn write_flows(flows: &[MigrationFlow], path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?)?;
    for f in flows {
        w.serialize(FlowRow {
            flow_id: f.id.0,
            job_id: Some(f.job.0),
            src: f.src.0,
            dst: f.dst.0,
            payload_bytes: f.payload,
            notice_s: f.notice_s,
            restart_s: f.restart_s,
            class: f.class.as_str().into(),
            arrival_s: f.arrival_s,
            path_cap_bytes_per_s: f.path_cap.is_finite().then_some(f.path_cap),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub src: u32,
    pub payload_bytes: f64,
    pub restart_s: f64,
    #[serde(default)]
    pub vram_bytes: f64,
    #[serde(default)]
    pub min_cuda: f64,
    pub remaining_runtime_s: f64,
    pub notice_s: Option<f64>,
    #[serde(default)]
    pub t_s: f64,
}

fn default_horizon() -> f64 {
    86_400.0
}

fn default_alpha() -> f64 {
    SelectParams::default().alpha
}

fn default_k_min() -> usize {
    SelectParams::default().k_min
}

fn default_theta() -> f64 {
    SelectParams::default().theta_load
}

/// Destination-selection input. The topology comes from `topology_file` or
/// is generated from `campus` and `seed`; bandwidth defaults to full link
/// capacity; hazards are constant per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectRequestFile {
    #[serde(default)]
    pub seed: u64,
    pub topology_file: Option<PathBuf>,
    pub link_trace_file: Option<PathBuf>,
    #[serde(default)]
    pub campus: CampusParams,
    /// Departures per hour for each node; a single value applies to all.
    pub hazard_per_h: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    pub loads: Option<Vec<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_theta")]
    pub theta_load: f64,
    pub request: RequestSpec,
}

/// Everything `topo_select` needs, materialised from a request file.
#[derive(Debug, Clone)]
pub struct SelectInputs {
    pub topo: Topology,
    pub bandwidth: BandwidthTrace,
    pub hazards: Vec<HazardTrace>,
    pub loads: Option<Vec<f64>>,
    pub request: MigrationRequest,
    pub params: SelectParams,
}

impl SelectRequestFile {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let f: Self = toml::from_str(&text).map_err(|e| Error::Parse(format!("request: {}", e.message())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((f, base))
    }

    pub fn resolve(&self, base: &Path) -> Result<SelectInputs> {
        let rel = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };
        let mut topo = match &self.topology_file {
            Some(p) => super::read_topology(&rel(p))?,
            None => generate_campus(&self.campus, &mut stream(self.seed, label::TOPOLOGY, 0))?,
        };
        let mut nodes = topo.nodes().to_vec();
        for n in &mut nodes {
            n.hazard_profile = n.id.0;
        }
        topo = Topology::new(nodes, topo.switches().to_vec(), topo.links().to_vec())?;
        let bandwidth = match &self.link_trace_file {
            Some(p) => super::read_link_traces(&rel(p))?,
            None => BandwidthTrace::at_capacity(&topo, 0.0, self.horizon_s)?,
        };
        let n = topo.nodes().len();
        let per_node = match self.hazard_per_h.len() {
            1 => vec![self.hazard_per_h[0]; n],
            k if k == n => self.hazard_per_h.clone(),
            k => return Err(Error::Parse(format!("hazard_per_h has {k} entries for {n} nodes"))),
        };
        let hazards = per_node
            .iter()
            .map(|h| HazardTrace::emergency_only(Piecewise::constant(0.0, self.horizon_s, h / 3600.0)?))
            .collect::<Result<Vec<_>>>()?;
        let r = &self.request;
        topo.node(NodeId(r.src))?;
        Ok(SelectInputs {
            topo,
            bandwidth,
            hazards,
            loads: self.loads.clone(),
            request: MigrationRequest {
                src: NodeId(r.src),
                payload: r.payload_bytes,
                restart_s: r.restart_s,
                vram_bytes: r.vram_bytes,
                min_cuda: r.min_cuda,
                remaining_runtime_s: r.remaining_runtime_s,
                notice_s: r.notice_s,
                t: r.t_s,
            },
            params: SelectParams { alpha: self.alpha, k_min: self.k_min, theta_load: self.theta_load },
        })
    }
}
