//! File formats: topology TOML, trace and input CSVs, results CSVs.
//!
//! Every CSV this crate writes starts with a `# reclaimsim <version>` comment
//! line; readers skip `#` lines.

mod inputs;
mod topology;
mod traces;

use std::io::Write;
use std::path::Path;

pub use inputs::{read_flows, read_jobs, write_flows, write_jobs, AllocJob, RequestSpec, SelectInputs, SelectRequestFile};
pub use topology::{read_topology, topology_from_toml, topology_to_toml, write_topology};
pub use traces::{
    read_departures, read_joint_trace, read_link_traces, write_departures, write_joint_trace, write_link_traces,
};

use crate::error::Result;

/// Header comment stamped on every emitted file.
pub fn version_header() -> String {
    format!("# reclaimsim {}", env!("CARGO_PKG_VERSION"))
}

pub fn csv_writer<W: Write>(mut w: W) -> Result<csv::Writer<W>> {
    writeln!(w, "{}", version_header())?;
    Ok(csv::WriterBuilder::new().from_writer(w))
}

pub fn csv_reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File> {
    Ok(std::fs::File::open(path)?)
}

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}
