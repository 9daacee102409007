use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Link, NodeSpec, Switch, Topology};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    #[serde(default)]
    switches: Vec<Switch>,
    nodes: Vec<NodeSpec>,
    links: Vec<Link>,
}

pub fn topology_from_toml(text: &str) -> Result<Topology> {
    let f: TopologyFile = toml::from_str(text).map_err(|e| Error::Parse(format!("topology: {}", e.message())))?;
    Topology::new(f.nodes, f.switches, f.links)
}

pub fn topology_to_toml(topo: &Topology) -> String {
    let f = TopologyFile {
        switches: topo.switches().to_vec(),
        nodes: topo.nodes().to_vec(),
        links: topo.links().to_vec(),
    };
    format!("{}\n{}", super::version_header(), toml::to_string(&f).expect("topology serializes"))
}

pub fn read_topology(path: &Path) -> Result<Topology> {
    topology_from_toml(&std::fs::read_to_string(path)?)
}

pub fn write_topology(topo: &Topology, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, topology_to_toml(topo))?)
}
