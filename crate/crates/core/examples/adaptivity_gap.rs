//! Compares the predicted fixed-versus-adaptive cost ratio with a Monte
//! Carlo replay on generated traces.
//!
//! `cargo run --release --example adaptivity_gap -- [seeds] [days]`

use rayon::prelude::*;
use reclaimsim::hazard::GeneratorParams;
use reclaimsim::sim::experiments::{gap_monte_carlo, summarize_gap};

fn main() -> reclaimsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let days: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(14.0);
    let params = GeneratorParams::default();
    let runs = (1..=seeds)
        .into_par_iter()
        .map(|seed| gap_monte_carlo(&params, 48.3, days * 86_400.0, seed))
        .collect::<reclaimsim::Result<Vec<_>>>()?;
    println!("seed,predicted,simulated,failures");
    for r in &runs {
        println!("{},{:.4},{:.4},{}", r.seed, r.stats.predicted_ratio, r.simulated_ratio(), r.failures);
    }
    let s = summarize_gap(&runs)?;
    println!("# pooled predicted {:.4} simulated {:.4} over {} seeds", s.predicted_ratio, s.simulated_ratio, s.seeds);
    Ok(())
}
