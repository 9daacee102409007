//! Scores every compatible destination for a job leaving node 0 on a
//! generated campus where one building is much more volatile than the rest.
//!
//! `cargo run --example select_destination`

use reclaimsim::hazard::HazardTrace;
use reclaimsim::model::{generate_campus, BandwidthTrace, CampusParams, NodeId, Piecewise};
use reclaimsim::placement::{topo_select, MigrationRequest, SelectParams, SelectView};
use reclaimsim::rng::{label, stream};
use reclaimsim::units::GB;

fn main() -> reclaimsim::Result<()> {
    let topo = generate_campus(&CampusParams::default(), &mut stream(4, label::TOPOLOGY, 0))?;
    let horizon = 86_400.0;
    let bandwidth = BandwidthTrace::at_capacity(&topo, 0.0, horizon)?;
    let hazards = topo
        .nodes()
        .iter()
        .map(|n| {
            let per_h = if n.building.0 == 0 { 3.0 } else { 0.3 };
            HazardTrace::emergency_only(Piecewise::constant(0.0, horizon, per_h / 3600.0)?)
        })
        .collect::<reclaimsim::Result<Vec<_>>>()?;
    let view = SelectView { topo: &topo, bandwidth: &bandwidth, hazards: &hazards, loads: None, online: None };
    let req = MigrationRequest {
        src: NodeId(0),
        payload: 6.0 * GB,
        restart_s: 40.0,
        vram_bytes: 20.0 * GB,
        min_cuda: 8.0,
        remaining_runtime_s: 4.0 * 3600.0,
        notice_s: Some(600.0),
        t: 0.0,
    };
    // a feasible same-building candidate wins even when it scores worse
    for alpha in [0.0, 1.0] {
        let sel = topo_select(&view, &req, &SelectParams { alpha, ..SelectParams::default() })?;
        println!("# alpha {alpha}: winner {:?}", sel.winner);
        println!("dest,t_mig_s,survival,score_s,same_building");
        for c in &sel.table {
            println!("{},{:.1},{:.3},{:.1},{}", c.dest.0, c.t_mig_s, c.survival, c.score_s, c.same_building);
        }
    }
    Ok(())
}
