use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::hazard::trace::HazardTrace;
use crate::model::{DepartureEvent, DepartureKind, NodeId};
use crate::rng::{label, stream, Rng};

/// Departures of a single anonymous provider over `[start, start + horizon]`.
pub fn sample_departures(trace: &HazardTrace, horizon_s: f64, seed: u64) -> Result<Vec<DepartureEvent>> {
    let mut rng = stream(seed, label::DEPARTURES, 0);
    sample_departures_for(trace, NodeId(0), trace.start(), trace.start() + horizon_s, &mut rng)
}

/// Thinning against the trace's peak rate over `[from, to)`.
pub fn sample_departures_for(
    trace: &HazardTrace,
    node: NodeId,
    from: f64,
    to: f64,
    rng: &mut Rng,
) -> Result<Vec<DepartureEvent>> {
    if trace.rates().is_empty() {
        return Err(Error::Empty("hazard trace"));
    }
    if from < trace.start() || to > trace.end() + 1e-9 {
        return Err(Error::TraceExtrapolation { t: to, start: trace.start(), end: trace.end() });
    }
    let peak = trace.max_rate();
    let mut out = Vec::new();
    if peak <= 0.0 || to <= from {
        return Ok(out);
    }
    let gap = Exp::new(peak).map_err(|e| Error::Parse(e.to_string()))?;
    let mut t = from;
    loop {
        t += gap.sample(rng);
        if t >= to {
            break;
        }
        if rng.random::<f64>() * peak >= trace.rate_at(t) {
            continue;
        }
        let ev = if rng.random::<f64>() < trace.scheduled_fraction() {
            DepartureEvent {
                node,
                time_s: t,
                kind: DepartureKind::Scheduled,
                notice_s: trace.notice().sample(rng),
            }
        } else {
            DepartureEvent::emergency(node, t)
        };
        out.push(ev);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::NoticeDist;
    use crate::model::Piecewise;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn trace(bps: Vec<f64>, rates: Vec<f64>) -> HazardTrace {
        HazardTrace::new(
            Piecewise::new(bps, rates).unwrap(),
            0.58,
            NoticeDist::lognormal(90.0, 0.8, 10.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_rate_gives_nothing() {
        let t = trace(vec![0.0, 100.0], vec![0.0]);
        assert!(sample_departures(&t, 100.0, 1).unwrap().is_empty());
    }

    #[test]
    fn rejects_horizon_past_trace() {
        let t = trace(vec![0.0, 100.0], vec![0.1]);
        assert!(sample_departures(&t, 200.0, 1).is_err());
    }

    #[test]
    fn constant_rate_mean_count() {
        let t = trace(vec![0.0, 1e6], vec![0.001]);
        let seeds = 1000u64;
        let total: usize = (0..seeds).map(|s| sample_departures(&t, 1e6, s).unwrap().len()).sum();
        let mean = total as f64 / seeds as f64;
        // sd of the mean = sqrt(1000 / 1000) = 1
        assert!((mean - 1000.0).abs() < 3.0, "mean {mean}");
    }

    #[test]
    fn six_fold_segments_and_labels() {
        let t = trace(vec![0.0, 50_000.0, 100_000.0], vec![0.001, 0.006]);
        let (mut lo, mut hi, mut sched, mut all) = (0usize, 0usize, 0usize, 0usize);
        for s in 0..1000 {
            for e in sample_departures(&t, 100_000.0, s).unwrap() {
                if e.time_s < 50_000.0 { lo += 1 } else { hi += 1 }
                all += 1;
                if e.kind == DepartureKind::Scheduled {
                    sched += 1;
                    assert!(e.notice_s >= 10.0);
                } else {
                    assert_eq!(e.notice_s, 0.0);
                }
            }
        }
        let ratio = hi as f64 / lo as f64;
        // delta-method sd of the ratio of two Poisson totals
        let sd = ratio * (1.0 / hi as f64 + 1.0 / lo as f64).sqrt();
        assert!((ratio - 6.0).abs() < 3.0 * sd, "ratio {ratio} sd {sd}");
        let frac = sched as f64 / all as f64;
        assert!((frac - 0.58).abs() < 0.01);
    }

    #[test]
    fn per_segment_counts_are_poisson() {
        // chi-square goodness of fit of one segment's counts over 1000 seeds
        let t = trace(vec![0.0, 1000.0, 2000.0], vec![0.004, 0.001]);
        let mean: f64 = 4.0;
        let mut hist = [0usize; 10];
        for s in 0..1000 {
            let n = sample_departures(&t, 2000.0, s)
                .unwrap()
                .iter()
                .filter(|e| e.time_s < 1000.0)
                .count();
            hist[n.min(9)] += 1;
        }
        let pmf = |k: usize| {
            (-mean).exp() * mean.powi(k as i32) / (1..=k).map(|x| x as f64).product::<f64>()
        };
        let mut expect: Vec<f64> = (0..9).map(|k| 1000.0 * pmf(k)).collect();
        expect.push(1000.0 - expect.iter().sum::<f64>());
        let stat: f64 = hist
            .iter()
            .zip(&expect)
            .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
            .sum();
        let crit = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi2 {stat} >= {crit}");
    }
}
