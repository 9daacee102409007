use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, csv_reader, csv_writer, open};
use crate::error::{Error, Result};
use crate::hazard::JointSample;
use crate::model::{BandwidthTrace, DepartureEvent, DepartureKind, LinkId, NodeId, Piecewise};

#[derive(Serialize, Deserialize)]
struct LinkRow {
    link_id: u32,
    start_s: f64,
    end_s: f64,
    available_bytes_per_s: f64,
}

/// One row per link segment.
pub fn write_link_traces(trace: &BandwidthTrace, path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?)?;
    for (id, s) in trace.iter() {
        let bps = s.breakpoints();
        for (k, v) in s.values().iter().enumerate() {
            w.serialize(LinkRow { link_id: id.0, start_s: bps[k], end_s: bps[k + 1], available_bytes_per_s: *v })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Link ids must be dense from zero and each link's segments contiguous.
pub fn read_link_traces(path: &Path) -> Result<BandwidthTrace> {
    let mut per_link: Vec<Vec<LinkRow>> = Vec::new();
    for row in csv_reader(open(path)?).deserialize() {
        let row: LinkRow = row?;
        let i = row.link_id as usize;
        if per_link.len() <= i {
            per_link.resize_with(i + 1, Vec::new);
        }
        per_link[i].push(row);
    }
    let mut series = Vec::with_capacity(per_link.len());
    for (i, rows) in per_link.into_iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::UnknownLink(LinkId(i as u32).to_string()));
        }
        let mut bps = vec![rows[0].start_s];
        let mut vals = Vec::with_capacity(rows.len());
        for r in &rows {
            if r.start_s != *bps.last().unwrap() {
                return Err(Error::Parse(format!("link {i}: segment at {} s is not contiguous", r.start_s)));
            }
            bps.push(r.end_s);
            vals.push(r.available_bytes_per_s);
        }
        series.push(Piecewise::new(bps, vals)?);
    }
    BandwidthTrace::new(series)
}

#[derive(Serialize, Deserialize)]
struct JointRow {
    t_s: f64,
    lambda_per_s: f64,
    b_eff_bytes_per_s: f64,
}

/// Joint (hazard, effective bandwidth) samples, one equally weighted row per
/// bucket.
pub fn write_joint_trace(samples: &[JointSample], path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?)?;
    for s in samples {
        w.serialize(JointRow { t_s: s.t_s, lambda_per_s: s.lambda, b_eff_bytes_per_s: s.b_eff })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_joint_trace(path: &Path) -> Result<Vec<JointSample>> {
    let mut out = Vec::new();
    for row in csv_reader(open(path)?).deserialize() {
        let r: JointRow = row?;
        out.push(JointSample { t_s: r.t_s, lambda: r.lambda_per_s, b_eff: r.b_eff_bytes_per_s });
    }
    if out.is_empty() {
        return Err(Error::Empty("joint trace"));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct DepartureRow {
    t_s: f64,
    node_id: u32,
    kind: String,
    notice_s: f64,
}

pub fn write_departures(events: &[DepartureEvent], path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?)?;
    for e in events {
        let kind = if e.is_emergency() { "emergency" } else { "scheduled" };
        w.serialize(DepartureRow { t_s: e.time_s, node_id: e.node.0, kind: kind.into(), notice_s: e.notice_s })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_departures(path: &Path) -> Result<Vec<DepartureEvent>> {
    let mut out = Vec::new();
    for row in csv_reader(open(path)?).deserialize() {
        let r: DepartureRow = row?;
        let kind = match r.kind.as_str() {
            "emergency" => DepartureKind::Emergency,
            "scheduled" => DepartureKind::Scheduled,
            k => return Err(Error::Parse(format!("unknown departure kind `{k}`"))),
        };
        out.push(DepartureEvent { node: NodeId(r.node_id), time_s: r.t_s, kind, notice_s: r.notice_s });
    }
    Ok(out)
}
