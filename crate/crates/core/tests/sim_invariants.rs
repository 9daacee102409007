use proptest::prelude::*;
use reclaimsim::sim::{run, run_scenario, Policy, Scenario, ScenarioConfig};

fn cfg(policy: Policy, seed: u64, hours: f64) -> ScenarioConfig {
    ScenarioConfig { seed, policy, horizon_s: hours * 3600.0, ..ScenarioConfig::default() }
}

#[test]
fn no_departures_means_no_rollback() {
    for p in Policy::ONLINE {
        let c = cfg(p, 5, 6.0);
        let mut sc = Scenario::build(&c).unwrap();
        sc.departures.clear();
        let r = run_scenario(&c, &sc).unwrap();
        assert_eq!(r.departures, 0, "{p}");
        assert_eq!(r.rollback_gpu_h, 0.0, "{p}");
        assert!(r.downtimes_s.is_empty(), "{p}");
        assert!(r.conservation_error_s < 1e-6);
    }
}

#[test]
fn without_migration_no_handoff_succeeds() {
    for seed in 1..=3 {
        let r = run(&cfg(Policy::NoMigration, seed, 12.0)).unwrap();
        assert!(r.departures > 0);
        assert_eq!(r.migration_success_pct, 0.0);
        assert_eq!(r.zero_loss_handoffs, 0);
    }
}

#[test]
fn rollback_total_matches_the_event_log() {
    for p in [Policy::Reclaimnet, Policy::RandomDst, Policy::NoMigration] {
        let r = run(&cfg(p, 2, 12.0)).unwrap();
        let logged: f64 = r.log.iter().filter(|e| e.event == "loss").map(|e| e.detail.parse::<f64>().unwrap()).sum();
        assert!((logged / 3600.0 - r.rollback_gpu_h).abs() < 1e-9, "{p}: {logged} vs {}", r.rollback_gpu_h);
        assert!(r.work_loss_gpu_h >= r.rollback_gpu_h);
    }
}

#[test]
fn admitted_flows_meet_their_deadlines() {
    for seed in 1..=4 {
        let r = run(&cfg(Policy::Reclaimnet, seed, 12.0)).unwrap();
        assert_eq!(r.deadline_violations, 0, "seed {seed}");
        assert_eq!(r.isolation_violations, 0, "seed {seed}");
    }
}

fn mean_loss_at(interval_s: f64) -> f64 {
    let seeds = 1..=4u64;
    let n = seeds.clone().count() as f64;
    seeds
        .map(|s| {
            let mut c = cfg(Policy::StaticCkpt, s, 24.0);
            c.knobs.static_interval_s = interval_s;
            run(&c).unwrap().work_loss_gpu_h
        })
        .sum::<f64>()
        / n
}

#[test]
fn static_grid_has_an_interior_optimum() {
    let (fast, mid, slow) = (mean_loss_at(30.0), mean_loss_at(600.0), mean_loss_at(4.0 * 3600.0));
    assert!(mid < fast && mid < slow, "30 s {fast:.2}, 600 s {mid:.2}, 4 h {slow:.2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn time_is_conserved(seed in 0u64..1000, pi in 0usize..6, beta_p1 in 0.05f64..0.5, beta_p3 in 0.1f64..0.5, alpha in 0.0f64..3.0) {
        let mut c = cfg(Policy::ONLINE[pi], seed, 4.0);
        c.knobs.beta_p1 = beta_p1;
        c.knobs.beta_p3 = beta_p3;
        c.knobs.alpha = alpha;
        let r = run(&c).unwrap();
        prop_assert!(r.conservation_error_s < 1e-6, "{}", r.conservation_error_s);
        prop_assert!(!r.invariant_violated());
        prop_assert!((0.0..=100.0).contains(&r.migration_success_pct));
        prop_assert!((0.0..=100.0).contains(&r.traffic_degradation_pct));
        prop_assert!(r.work_loss_gpu_h >= 0.0);
    }
}
