//! Steps a provider pool's no-notice rate up 1.7x and follows the pooled
//! estimate window by window.
//!
//! `cargo run --example drift -- [seed]`

use reclaimsim::sim::experiments::{drift_reconvergence, DriftSetup};

fn main() -> reclaimsim::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let setup = DriftSetup { seed, ..DriftSetup::default() };
    let out = drift_reconvergence(&setup)?;
    println!("window_end_h,lambda_hat_per_h,lambda_per_h,rel_err,events_since_shift");
    for w in &out.windows {
        println!(
            "{:.1},{:.3},{:.3},{:.3},{}",
            w.end_s / 3600.0,
            w.lambda_hat * 3600.0,
            w.lambda_true * 3600.0,
            w.rel_err,
            w.events_since_shift
        );
    }
    match out.events_to_converge {
        Some(n) => println!("# reconverged after {n} post-shift events (budget {})", setup.event_budget),
        None => println!("# did not reconverge"),
    }
    Ok(())
}
