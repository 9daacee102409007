use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{ensure_positive, Error, Result};
use crate::model::{DepartureEvent, Piecewise};

pub const DEFAULT_WINDOW_S: f64 = 3600.0;
/// Quantile used for the bandwidth lower bound.
pub const BANDWIDTH_QUANTILE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardEstimate {
    pub lambda_hat: f64,
    pub lambda_upper: f64,
    pub window_s: f64,
    pub n_events: usize,
}

/// Exact one-sided Poisson upper bound on a rate from `n` events observed
/// over `exposure_s`. For `n = 0` at 95% this is close to `3 / exposure_s`.
pub fn poisson_upper(n: usize, exposure_s: f64, confidence: f64) -> f64 {
    let chi = ChiSquared::new(2.0 * (n as f64 + 1.0)).expect("positive degrees of freedom");
    chi.inverse_cdf(confidence) / (2.0 * exposure_s)
}

/// Sliding-window rate of no-notice departures in `(now - window_s, now]`.
pub fn estimate_hazard(
    log: &[DepartureEvent],
    now: f64,
    window_s: f64,
    confidence: f64,
) -> Result<HazardEstimate> {
    estimate_hazard_pooled(log, now, window_s, window_s, confidence)
}

/// Like [`estimate_hazard`] but normalised by `exposure_s`, the summed
/// observation time of every provider contributing to `log` (for example
/// `providers * window_s`). Gives a per-provider rate.
pub fn estimate_hazard_pooled(
    log: &[DepartureEvent],
    now: f64,
    window_s: f64,
    exposure_s: f64,
    confidence: f64,
) -> Result<HazardEstimate> {
    ensure_positive("window_s", window_s)?;
    ensure_positive("exposure_s", exposure_s)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::OutOfRange { what: "confidence", value: confidence });
    }
    let lo = now - window_s;
    let n = log
        .iter()
        .filter(|e| e.is_emergency() && e.time_s > lo && e.time_s <= now)
        .count();
    let lambda_hat = n as f64 / exposure_s;
    let lambda_upper = poisson_upper(n, exposure_s, confidence).max(lambda_hat);
    Ok(HazardEstimate { lambda_hat, lambda_upper, window_s, n_events: n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthEstimate {
    pub b_hat: f64,
    pub b_lower: f64,
    pub sample_period_s: f64,
}

/// Mean and lower-decile of periodic bandwidth samples.
pub fn estimate_bandwidth(samples: &[f64], sample_period_s: f64) -> Result<BandwidthEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("bandwidth samples"));
    }
    if let Some(&bad) = samples.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::NonPositive { what: "bandwidth sample", value: bad });
    }
    let weighted: Vec<(f64, f64)> = samples.iter().map(|&v| (v, 1.0)).collect();
    Ok(weighted_estimate(weighted, sample_period_s))
}

/// Estimate over `(now - window_s, now]` of a piecewise-constant series.
/// Segments are weighted by their duration, which is what periodic sampling
/// converges to as the period shrinks.
pub fn estimate_bandwidth_series(
    series: &Piecewise,
    now: f64,
    window_s: f64,
    sample_period_s: f64,
) -> Result<BandwidthEstimate> {
    ensure_positive("window_s", window_s)?;
    let lo = (now - window_s).max(series.start());
    let hi = now.min(series.end());
    let w = if hi > lo {
        series.weighted_window(lo, hi)
    } else {
        vec![(series.value_at_or_last(now).0, 1.0)]
    };
    Ok(weighted_estimate(w, sample_period_s))
}

fn weighted_estimate(mut w: Vec<(f64, f64)>, sample_period_s: f64) -> BandwidthEstimate {
    let total: f64 = w.iter().map(|p| p.1).sum();
    let b_hat = w.iter().map(|(v, d)| v * d).sum::<f64>() / total;
    w.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = BANDWIDTH_QUANTILE * total;
    let mut acc = 0.0;
    let mut q = w[w.len() - 1].0;
    for (v, d) in &w {
        acc += d;
        if acc >= target {
            q = *v;
            break;
        }
    }
    BandwidthEstimate { b_hat, b_lower: q.min(b_hat), sample_period_s }
}
