//! Splits a shared checkpoint write budget across jobs, first without caps
//! and then with one job pinned by its host link, and prints the interval
//! each rate implies.
//!
//! `cargo run --example allocate_bandwidth`

use reclaimsim::checkpoint::{aggregate_cost, cube_root_allocation, local_interval, water_fill_boxed, BoxedJob};
use reclaimsim::units::{GB, MBPS};

fn main() -> reclaimsim::Result<()> {
    // (departures per second, checkpoint bytes)
    let jobs = [(0.5 / 3600.0, 2.0 * GB), (1.0 / 3600.0, 4.0 * GB), (2.0 / 3600.0, 8.0 * GB)];
    let budget = 300.0 * MBPS;

    let rates = cube_root_allocation(&jobs, budget)?;
    println!("job,rate_mb_s,interval_s");
    for (i, (&(l, c), &b)) in jobs.iter().zip(&rates).enumerate() {
        println!("{i},{:.1},{:.0}", b / MBPS, local_interval(c, l, b)?);
    }
    println!("# aggregate cost {:.4}", aggregate_cost(&jobs, &rates));

    let boxed: Vec<BoxedJob> = jobs
        .iter()
        .enumerate()
        .map(|(i, &(lambda, payload))| BoxedJob { lambda, payload, cap: if i == 2 { 90.0 * MBPS } else { f64::INFINITY } })
        .collect();
    let capped = water_fill_boxed(&boxed, budget)?;
    println!("# job 2 capped at 90 MB/s");
    for (i, (b, pinned)) in capped.rates.iter().zip(&capped.capped).enumerate() {
        println!("{i},{:.1},{pinned}", b / MBPS);
    }
    Ok(())
}
