//! Runs every online policy on one generated campus and prints the results
//! table as CSV.
//!
//! `cargo run --release --example simulate -- [seed]`

use reclaimsim::sim::{run_scenario, Policy, Scenario, ScenarioConfig, SimReport};

fn main() -> reclaimsim::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = ScenarioConfig { seed, ..Default::default() };
    let world = Scenario::build(&cfg)?;
    let mut reports = Vec::new();
    for policy in Policy::ONLINE {
        cfg.policy = policy;
        reports.push(run_scenario(&cfg, &world)?);
    }
    SimReport::write_csv(&reports, std::io::stdout().lock())
}
