//! Admits three handoffs on a 10-unit bottleneck with a 3-unit research
//! floor, then staggers the admitted starts.
//!
//! `cargo run --example admit_flows`

use reclaimsim::admission::{admit, stagger, BandwidthBudget, FlowId, MigrationFlow, TrafficClass};
use reclaimsim::model::{JobId, NodeId};

fn main() -> reclaimsim::Result<()> {
    let budget = BandwidthBudget::new(10.0, 3.0, 0.3)?;
    println!("# reserved {} migration {}", budget.reserved, budget.migration);
    let flows: Vec<MigrationFlow> = (0..3u32)
        .map(|i| {
            // 30 units over (notice - restart) = 10 s each, deadlines 11, 12, 13
            let notice = 11.0 + i as f64;
            let restart = 1.0 + i as f64;
            MigrationFlow::new(FlowId(i as u64), JobId(i), NodeId(i), NodeId(9), 30.0, notice, restart, TrafficClass::Planned, 0.0)
        })
        .collect();
    let mut out = admit(&flows, &budget, 0.0);
    stagger(&mut out.admitted, 4.0);
    println!("flow,status,min_rate,assigned_rate,start_offset_s");
    for f in out.admitted.iter().chain(&out.degraded) {
        println!("{},{},{},{},{}", f.id.0, f.status.as_str(), f.min_rate, f.assigned_rate, f.start_offset_s);
    }
    Ok(())
}
