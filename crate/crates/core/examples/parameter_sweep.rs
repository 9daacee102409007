//! Sweeps the three controller shares over a small grid and prints the
//! per-cell mean work loss with bootstrap intervals.
//!
//! `cargo run --release --example parameter_sweep -- [seeds]`

use reclaimsim::sim::{sweep, ScenarioConfig, SweepGrid};

fn main() -> reclaimsim::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let seeds: Vec<u64> = (1..=n).collect();
    let table = sweep(&ScenarioConfig::default(), &SweepGrid::default(), &seeds)?;
    table.write_summary(std::io::stdout().lock())?;
    if let Some(best) = table.argmin_work_loss() {
        eprintln!("lowest mean loss at beta_p1 {} alpha {} beta_p3 {}", best.beta_p1, best.alpha, best.beta_p3);
    }
    eprintln!("largest deviation from the grid mean: {:.1}%", 100.0 * table.flatness());
    Ok(())
}
