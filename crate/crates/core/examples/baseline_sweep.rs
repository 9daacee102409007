//! Median metrics per online policy over a range of seeds, each seed
//! sharing one generated world across policies.
//!
//! `cargo run --release --example baseline_sweep -- [seeds] [config.toml]`

use rayon::prelude::*;
use reclaimsim::sim::{run_scenario, Policy, Scenario, ScenarioConfig, SimReport};
use reclaimsim::sim::report::median;

fn main() -> reclaimsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let base = match args.next() {
        Some(path) => ScenarioConfig::load(path.as_ref())?,
        None => ScenarioConfig::default(),
    };
    let runs: Vec<Vec<SimReport>> = (1..=seeds)
        .into_par_iter()
        .map(|seed| {
            let cfg = ScenarioConfig { seed, ..base.clone() };
            let world = Scenario::build(&cfg)?;
            Policy::ONLINE
                .iter()
                .map(|&policy| run_scenario(&ScenarioConfig { policy, ..cfg.clone() }, &world))
                .collect()
        })
        .collect::<reclaimsim::Result<_>>()?;

    println!("policy,work_loss_gpu_h,rollback_gpu_h,overhead_gpu_h,downtime_median_s,success_pct,degradation_pct");
    for (k, policy) in Policy::ONLINE.iter().enumerate() {
        let col = |f: fn(&SimReport) -> f64| median(&runs.iter().map(|r| f(&r[k])).collect::<Vec<_>>());
        println!(
            "{policy},{:.2},{:.2},{:.2},{:.1},{:.1},{:.2}",
            col(|r| r.work_loss_gpu_h),
            col(|r| r.rollback_gpu_h),
            col(|r| r.overhead_gpu_h),
            col(|r| r.downtime_median_s),
            col(|r| r.migration_success_pct),
            col(|r| r.traffic_degradation_pct),
        );
    }
    Ok(())
}
