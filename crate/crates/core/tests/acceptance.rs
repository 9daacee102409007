//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use reclaimsim::checkpoint::{adaptivity_gap, aggregate_cost, cube_root_allocation, local_cost, local_interval, water_fill_boxed, BoxedJob};
use reclaimsim::hazard::{gen_correlated_trace, GeneratorParams};
use reclaimsim::placement::LocalityReport;
use reclaimsim::sim::experiments::{drift_reconvergence, gap_monte_carlo, isolation_stress, locality_windows, summarize_gap, DriftSetup, IsolationStress};
use reclaimsim::sim::{median, oracle_tiny, random_tiny, replay, run, stress_scenario, Policy, ScenarioConfig, SimReport};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

// ---- allocation against numeric oracles ----

fn simplex_cost(jobs: &[(f64, f64)], x: &[f64], budget: f64) -> f64 {
    let rates: Vec<f64> = x.iter().map(|v| v * budget).collect();
    aggregate_cost(jobs, &rates)
}

/// Euclidean projection onto `{x >= floor, sum x = 1}`.
fn project(y: &[f64], floor: f64) -> Vec<f64> {
    let k = y.len();
    let mass = 1.0 - floor * k as f64;
    let z: Vec<f64> = y.iter().map(|v| v - floor).collect();
    let mut u = z.clone();
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut acc, mut theta) = (0.0, 0.0);
    for (i, ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - mass) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    z.iter().map(|v| (v - theta).max(0.0) + floor).collect()
}

fn projected_gradient(jobs: &[(f64, f64)], budget: f64, start: Vec<f64>) -> f64 {
    let floor = 1e-9;
    let mut x = project(&start, floor);
    let mut fx = simplex_cost(jobs, &x, budget);
    let mut step = 1e-2;
    for _ in 0..20_000 {
        let g: Vec<f64> = jobs
            .iter()
            .zip(&x)
            .map(|(&(l, c), &xi)| -0.5 * (2.0 * l * c / budget).sqrt() * xi.powf(-1.5))
            .collect();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        let mut improved = false;
        while step > 1e-18 {
            let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi / gn).collect();
            let cand = project(&y, floor);
            let fc = simplex_cost(jobs, &cand, budget);
            if fc < fx {
                x = cand;
                fx = fc;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    fx
}

/// Best of `points` uniform draws on the simplex.
fn random_search(jobs: &[(f64, f64)], budget: f64, points: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let k = jobs.len();
    let mut best = (f64::INFINITY, vec![1.0 / k as f64; k]);
    let mut x = vec![0.0; k];
    for _ in 0..points {
        let mut s = 0.0;
        for v in x.iter_mut() {
            *v = -(1.0 - rng.random::<f64>()).ln();
            s += *v;
        }
        let mut cost = 0.0;
        for (&(l, c), v) in jobs.iter().zip(x.iter_mut()) {
            *v /= s;
            cost += (2.0 * l * c / (*v * budget)).sqrt();
        }
        if cost < best.0 {
            best = (cost, x.clone());
        }
    }
    best
}

/// Minimum over every choice of capped set, checked against the KKT
/// conditions of the capped problem.
fn active_set_enumeration(jobs: &[BoxedJob], budget: f64) -> Vec<f64> {
    let k = jobs.len();
    let w: Vec<f64> = jobs.iter().map(|j| (j.lambda * j.payload).cbrt()).collect();
    let pairs: Vec<(f64, f64)> = jobs.iter().map(|j| (j.lambda, j.payload)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << k) {
        let capped = |i: usize| mask & (1 << i) != 0;
        let pinned: f64 = (0..k).filter(|&i| capped(i)).map(|i| jobs[i].cap).sum();
        let free_w: f64 = (0..k).filter(|&i| !capped(i)).map(|i| w[i]).sum();
        let residual = budget - pinned;
        let rates: Vec<f64> = if free_w == 0.0 {
            if residual < 0.0 {
                continue;
            }
            jobs.iter().map(|j| j.cap).collect()
        } else {
            if residual <= 0.0 {
                continue;
            }
            (0..k).map(|i| if capped(i) { jobs[i].cap } else { residual * w[i] / free_w }).collect()
        };
        if (0..k).any(|i| rates[i] > jobs[i].cap * (1.0 + 1e-12)) {
            continue;
        }
        let cost = aggregate_cost(&pairs, &rates);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, rates));
        }
    }
    best.expect("the all-free or all-capped set is always feasible").1
}

fn c1() -> Verdict {
    let t0 = Instant::now();
    let worst = (0..500u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(1..=4);
            let jobs: Vec<(f64, f64)> = (0..k)
                .map(|_| (10f64.powf(rng.random_range(-6.0..-2.0)), 10f64.powf(rng.random_range(8.0..11.0))))
                .collect();
            let budget = 10f64.powf(rng.random_range(7.0..10.0));
            let closed = aggregate_cost(&jobs, &cube_root_allocation(&jobs, budget).unwrap());
            let (rs, start) = random_search(&jobs, budget, 1_000_000, &mut rng);
            let pg = projected_gradient(&jobs, budget, start);
            let oracle = rs.min(pg);
            ((closed - oracle).abs() / oracle, closed > oracle * (1.0 + 1e-4))
        })
        .collect::<Vec<_>>();
    let max_rel = worst.iter().map(|w| w.0).fold(0.0, f64::max);
    let beaten = worst.iter().filter(|w| w.1).count();

    let mut mismatches = 0;
    let mut max_dev = 0.0f64;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let k = rng.random_range(1..=6);
        let jobs: Vec<BoxedJob> = (0..k)
            .map(|_| BoxedJob {
                lambda: 10f64.powf(rng.random_range(-6.0..-2.0)),
                payload: 10f64.powf(rng.random_range(8.0..11.0)),
                cap: 10f64.powf(rng.random_range(6.0..9.0)),
            })
            .collect();
        let budget = 10f64.powf(rng.random_range(6.5..9.5));
        let got = water_fill_boxed(&jobs, budget).unwrap().rates;
        let want = active_set_enumeration(&jobs, budget);
        let dev = got.iter().zip(&want).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        max_dev = max_dev.max(dev);
        if dev > 1e-9 {
            mismatches += 1;
        }
    }
    let el = t0.elapsed();
    verdict(
        max_rel <= 1e-4 && beaten == 0 && mismatches == 0 && within(el, 60),
        format!("cube-root max rel err {max_rel:.2e}, oracle better in {beaten}/500; water-fill mismatches {mismatches}/500 (max dev {max_dev:.1e}); {:.1} s", el.as_secs_f64()),
    )
}

// ---- local interval is the global minimum ----

fn c2() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..10_000 {
        let c = 10f64.powf(rng.random_range(6.0..11.0));
        let l = 10f64.powf(rng.random_range(-7.0..-2.0));
        let b = 10f64.powf(rng.random_range(5.0..10.0));
        let d = local_interval(c, l, b).unwrap();
        let at = local_cost(c, l, b, d);
        if [0.25, 0.5, 2.0, 4.0].iter().any(|s| local_cost(c, l, b, s * d) <= at) {
            bad += 1;
        }
    }
    let el = t0.elapsed();
    verdict(bad == 0 && within(el, 5), format!("{bad}/10000 instances with a scaled interval no worse; {:.2} s", el.as_secs_f64()))
}

// ---- adaptivity gap ----

fn c3() -> Verdict {
    let t0 = Instant::now();
    let p = GeneratorParams::default();
    let trace = gen_correlated_trace(&p, 14.0 * 86_400.0, 3).unwrap();
    let samples: Vec<(f64, f64)> = trace.samples().iter().map(|s| (s.lambda, s.b_eff)).collect();
    let predicted = adaptivity_gap(&samples).unwrap().predicted_ratio;
    let runs: Vec<_> = (1..=30u64).into_par_iter().map(|s| gap_monte_carlo(&p, 48.3, 14.0 * 86_400.0, s).unwrap()).collect();
    let sum = summarize_gap(&runs).unwrap();
    let rel = (sum.simulated_ratio - sum.predicted_ratio).abs() / sum.predicted_ratio;
    let el = t0.elapsed();
    verdict(
        (1.03..=1.08).contains(&predicted) && rel <= 0.10 && within(el, 120),
        format!(
            "predicted {predicted:.4}; pooled over 30 seeds predicted {:.4} simulated {:.4} (rel {rel:.3}); {:.1} s",
            sum.predicted_ratio,
            sum.simulated_ratio,
            el.as_secs_f64()
        ),
    )
}

// ---- admitted flows meet their deadlines ----

fn c4() -> Verdict {
    let t0 = Instant::now();
    let reports: Vec<SimReport> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + i);
            let mut cfg = ScenarioConfig { seed: 1000 + i, horizon_s: 6.0 * 3600.0, ..ScenarioConfig::default() };
            cfg.hazard.scheduled_fraction = rng.random_range(0.2..0.9);
            cfg.hazard.notice_median_s = rng.random_range(60.0..900.0);
            cfg.hazard.burst_rate_per_h = rng.random_range(0.0..1.0);
            cfg.bandwidth.access_fraction = rng.random_range(0.3..0.9);
            run(&cfg).unwrap()
        })
        .collect();
    let violations: u64 = reports.iter().map(|r| r.deadline_violations).sum();
    let admitted: u64 = reports.iter().map(|r| r.admitted_flows).sum();
    let emergencies: u64 = reports.iter().map(|r| r.emergency_reclaims).sum();
    let el = t0.elapsed();
    verdict(
        violations == 0 && admitted > 0 && emergencies > 0 && within(el, 120),
        format!("{violations} violations over {admitted} admitted flows ({emergencies} emergency reclaims); {:.1} s", el.as_secs_f64()),
    )
}

// ---- isolation ----

fn c5() -> Verdict {
    let t0 = Instant::now();
    let s = IsolationStress::default();
    let out = isolation_stress(&s).unwrap();
    let cap = s.capacity - s.b_min;
    let bounded = out.monitor.violations == 0 && out.monitor.max_controlled <= cap + 1e-9 && out.monitor.ticks >= 100_000;
    let loaded = out.offered_rate >= 3.0 * cap;

    let seeds: Vec<u64> = (1..=6).collect();
    let deg = |p: Policy| -> f64 {
        let v: Vec<f64> = seeds
            .par_iter()
            .map(|&s| {
                let mut cfg = stress_scenario(s);
                cfg.policy = p;
                run(&cfg).unwrap().traffic_degradation_pct
            })
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (shaped, unshaped) = (deg(Policy::Reclaimnet), deg(Policy::NoTcbpf));
    let ratio = unshaped / shaped;
    let el = t0.elapsed();
    verdict(
        bounded && loaded && ratio >= 5.0 && within(el, 120),
        format!(
            "{} ticks, offered {:.1}, max classified {:.3} vs {cap}, violations {}; degradation {shaped:.2}% vs {unshaped:.2}% (x{ratio:.1}); {:.1} s",
            out.monitor.ticks,
            out.offered_rate,
            out.monitor.max_controlled,
            out.monitor.violations,
            el.as_secs_f64()
        ),
    )
}

// ---- locality ----

fn c6() -> Verdict {
    let reports = locality_windows(100, 3.4, 6).unwrap();
    let holds = reports.iter().filter(|r| matches!(r, LocalityReport::Holds { .. })).count();
    let violated = reports.iter().filter(|r| matches!(r, LocalityReport::Violated { .. })).count();
    verdict(holds == 100, format!("{holds}/100 hold, {violated} violated, {} without separation", 100 - holds - violated))
}

// ---- baseline ordering and the tiny oracle ----

fn c7() -> Verdict {
    let seeds: Vec<u64> = (1..=30).collect();
    let med = |p: Policy| -> f64 {
        let v: Vec<f64> = seeds
            .par_iter()
            .map(|&s| run(&ScenarioConfig { seed: s, policy: p, ..ScenarioConfig::default() }).unwrap().work_loss_gpu_h)
            .collect();
        median(&v)
    };
    let [rn, tv, rd, nt, st, nm] = Policy::ONLINE.map(med);
    let links = [
        ("reclaimnet<=tv_fixed", rn <= tv),
        ("tv_fixed<=random_dst", tv <= rd),
        ("tv_fixed<=no_tcbpf", tv <= nt),
        ("random_dst<=static", rd <= st),
        ("no_tcbpf<=static", nt <= st),
        ("static<=no_migration", st <= nm),
    ];
    let broken: Vec<&str> = links.iter().filter(|l| !l.1).map(|l| l.0).collect();

    let mut above = 0;
    for seed in 0..100u64 {
        let inst = random_tiny(seed);
        let best = oracle_tiny(&inst).unwrap().loss_slots;
        for p in Policy::ONLINE {
            if replay(&inst, p, seed).unwrap().loss_slots < best {
                above += 1;
            }
        }
    }
    verdict(
        broken.is_empty() && above == 0,
        format!(
            "medians GPU-h: reclaimnet {rn:.2}, tv_fixed {tv:.2}, random_dst {rd:.2}, no_tcbpf {nt:.2}, static {st:.2}, no_migration {nm:.2}; broken {broken:?}; oracle beaten {above} times on 100 tiny instances"
        ),
    )
}

// ---- determinism across processes ----

fn c8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let once = |name: &str| -> Vec<u8> {
        let status = Command::new(env!("CARGO_BIN_EXE_reclaimsim"))
            .args(["simulate", "--seed", "11", "--horizon-s", "21600", "--log", name, "-o", "out.csv"])
            .current_dir(dir.path())
            .env_remove("RECLAIMSIM_CONFIG_DIR")
            .stderr(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let (a, b) = (once("a.log"), once("b.log"));
    verdict(a == b && !a.is_empty(), format!("two invocations, {} and {} log bytes, identical: {}", a.len(), b.len(), a == b))
}

// ---- ablation directionality ----

fn c9() -> Verdict {
    let seeds: Vec<u64> = (1..=30).collect();
    let rows: Vec<Vec<SimReport>> = seeds
        .par_iter()
        .map(|&s| Policy::SUBSETS.iter().map(|&p| run(&ScenarioConfig { seed: s, policy: p, ..ScenarioConfig::default() }).unwrap()).collect())
        .collect();
    let idx = |p: Policy| Policy::SUBSETS.iter().position(|&q| q == p).unwrap();
    let (off, p1, p2, p3, p12, p13, p23, full) = (
        idx(Policy::AllOff),
        idx(Policy::P1Only),
        idx(Policy::P2Only),
        idx(Policy::P3Only),
        idx(Policy::P1P2),
        idx(Policy::P1P3),
        idx(Policy::P2P3),
        idx(Policy::Reclaimnet),
    );
    let share = |f: &dyn Fn(&[SimReport]) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64;
    let checks = [
        ("p1 loss", share(&|r| r[p1].work_loss_gpu_h < r[off].work_loss_gpu_h)),
        ("p2 downtime", share(&|r| r[p2].downtime_median_s < r[off].downtime_median_s)),
        ("p3 degradation", share(&|r| r[p3].traffic_degradation_pct < r[off].traffic_degradation_pct)),
        ("full vs p2p3 loss", share(&|r| r[full].work_loss_gpu_h <= r[p23].work_loss_gpu_h)),
        ("full vs p1p3 downtime", share(&|r| r[full].downtime_median_s <= r[p13].downtime_median_s)),
        ("full vs p1p2 degradation", share(&|r| r[full].traffic_degradation_pct <= r[p12].traffic_degradation_pct)),
    ];
    let pass = checks.iter().all(|c| c.1 >= 0.9);
    let detail = checks.iter().map(|(n, s)| format!("{n} {:.0}%", 100.0 * s)).collect::<Vec<_>>().join(", ");
    verdict(pass, detail)
}

// ---- drift ----

fn c10() -> Verdict {
    let outs: Vec<(u64, Option<usize>, bool)> = (1..=10u64)
        .map(|seed| {
            let s = DriftSetup { seed, ..DriftSetup::default() };
            let o = drift_reconvergence(&s).unwrap();
            (seed, o.events_to_converge, o.within_budget(s.event_budget))
        })
        .collect();
    let budget = DriftSetup::default().event_budget;
    let worst = outs.iter().filter_map(|o| o.1).max();
    let failed = outs.iter().filter(|o| !o.2).count();
    verdict(failed == 0, format!("{}/10 seeds reconverged within {budget} events, worst {worst:?}", 10 - failed))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Verdict); 10] = [
        ("C1", "closed-form allocation vs numeric oracles", c1),
        ("C2", "local interval is the global minimum", c2),
        ("C3", "adaptivity gap prediction", c3),
        ("C4", "zero deadline violations", c4),
        ("C5", "migration isolation", c5),
        ("C6", "same-building locality", c6),
        ("C7", "baseline ordering and tiny oracle", c7),
        ("C8", "determinism across processes", c8),
        ("C9", "ablation directionality", c9),
        ("C10", "drift reconvergence", c10),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('C')).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let t0 = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failed += 1;
        }
        println!("{id} {} {name} [{:.1} s]: {}", if v.pass { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64(), v.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
