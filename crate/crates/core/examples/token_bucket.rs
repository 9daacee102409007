//! Drives the shaped migration class on a 10-unit link with a 3-unit
//! research floor at three times its share and reports what got through.
//!
//! `cargo run --release --example token_bucket -- [ticks]`

use reclaimsim::sim::experiments::{isolation_stress, IsolationStress};

fn main() -> reclaimsim::Result<()> {
    let ticks = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let s = IsolationStress { ticks, ..IsolationStress::default() };
    let out = isolation_stress(&s)?;
    println!("ticks,offered,carried,max_migration,min_research,violations");
    println!(
        "{},{:.2},{:.2},{:.4},{:.4},{}",
        out.monitor.ticks, out.offered_rate, out.carried_rate, out.monitor.max_controlled, out.min_research_rate, out.monitor.violations
    );
    Ok(())
}
