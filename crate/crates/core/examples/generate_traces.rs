//! Writes a campus topology, its link traces, departures and the joint
//! hazard/bandwidth trace into a directory, then reads every file back.
//!
//! `cargo run --example generate_traces -- [dir]`

use std::path::PathBuf;

use reclaimsim::io;
use reclaimsim::sim::{Scenario, ScenarioConfig};

fn main() -> reclaimsim::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("reclaimsim-traces"));
    std::fs::create_dir_all(&dir)?;
    let cfg = ScenarioConfig { horizon_s: 6.0 * 3600.0, ..ScenarioConfig::default() };
    let world = Scenario::build(&cfg)?;

    io::write_topology(&world.topo, &dir.join("topology.toml"))?;
    io::write_link_traces(&world.bandwidth, &dir.join("links.csv"))?;
    io::write_departures(&world.departures, &dir.join("departures.csv"))?;
    io::write_joint_trace(&world.campus.samples(), &dir.join("joint.csv"))?;

    assert_eq!(io::read_topology(&dir.join("topology.toml"))?.nodes().len(), world.topo.nodes().len());
    assert_eq!(io::read_link_traces(&dir.join("links.csv"))?, world.bandwidth);
    assert_eq!(io::read_departures(&dir.join("departures.csv"))?, world.departures);
    println!("wrote {} links, {} departures to {}", world.bandwidth.len(), world.departures.len(), dir.display());
    Ok(())
}
