//! Exhaustive minimum loss on random tiny instances next to the loss of
//! each online rule replayed on the same instance.
//!
//! `cargo run --release --example oracle_tiny -- [instances]`

use reclaimsim::sim::{oracle_tiny, random_tiny, replay, Policy};

fn main() -> reclaimsim::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    print!("seed,jobs,assignments,oracle");
    for p in Policy::ONLINE {
        print!(",{p}");
    }
    println!();
    for seed in 0..n {
        let inst = random_tiny(seed);
        let best = oracle_tiny(&inst)?;
        print!("{seed},{},{},{}", inst.jobs.len(), best.assignments, best.loss_s);
        for p in Policy::ONLINE {
            print!(",{}", replay(&inst, p, seed)?.loss_s);
        }
        println!();
    }
    Ok(())
}
