//! Joint hazard/bandwidth traces with prescribed marginal spread and
//! cross-correlation, built with a Gaussian copula.
//!
//! The hazard marginal is Gamma and the bandwidth marginal is log-normal
//! (so its reciprocal is log-normal too). A latent bivariate normal pair with
//! correlation `rho` drives both; `rho` is solved so that the Pearson
//! correlation of the transformed pair hits the target.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, Normal};

use crate::error::{Error, Result};
use crate::hazard::trace::HazardTrace;
use crate::model::{BandwidthTrace, Piecewise};
use crate::rng::{label, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorParams {
    /// Mean no-notice hazard, events/s.
    pub mean_lambda: f64,
    /// Mean effective bandwidth, bytes/s.
    pub mean_bw: f64,
    pub target_corr: f64,
    pub cv_lambda: f64,
    /// Coefficient of variation of `1 / bandwidth`.
    pub cv_inv_bw: f64,
    pub bucket_s: f64,
    /// Lag-one autocorrelation of the latent process (0 = independent buckets).
    pub ar_phi: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            mean_lambda: 0.99 / 3600.0,
            mean_bw: 0.530e9 / 8.0,
            target_corr: -0.43,
            cv_lambda: 0.62,
            cv_inv_bw: 0.31,
            bucket_s: 600.0,
            ar_phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub t_s: f64,
    pub lambda: f64,
    pub b_eff: f64,
}

#[derive(Debug, Clone)]
pub struct CorrelatedTrace {
    pub hazard: HazardTrace,
    /// Single-series trace of effective bandwidth.
    pub bandwidth: BandwidthTrace,
    /// Both marginals were degenerate; the trace is constant and its
    /// correlation undefined.
    pub constant: bool,
    /// Latent correlation that was used.
    pub latent_rho: f64,
}

impl CorrelatedTrace {
    pub fn lambda(&self) -> &Piecewise {
        self.hazard.rates()
    }

    pub fn b_eff(&self) -> &Piecewise {
        self.bandwidth.series(crate::model::LinkId(0)).expect("one series")
    }

    pub fn samples(&self) -> Vec<JointSample> {
        let l = self.lambda();
        let b = self.b_eff();
        l.values()
            .iter()
            .zip(b.values())
            .zip(l.breakpoints())
            .map(|((&lambda, &b_eff), &t_s)| JointSample { t_s, lambda, b_eff })
            .collect()
    }
}

/// Grid of latent values used for quadrature and as the interpolation table
/// for the hazard quantile function.
const Z_MIN: f64 = -8.0;
const Z_STEP: f64 = 0.005;
const Z_N: usize = 3201;

struct Marginals {
    /// Hazard value at each latent grid point.
    lambda_table: Vec<f64>,
    /// Log-normal parameters of the bandwidth.
    mu: f64,
    sigma: f64,
}

impl Marginals {
    fn new(p: &GeneratorParams) -> Result<Self> {
        let lambda_table = if p.cv_lambda > 0.0 {
            let shape = 1.0 / (p.cv_lambda * p.cv_lambda);
            let rate = shape / p.mean_lambda;
            let g = Gamma::new(shape, rate).map_err(|e| Error::GeneratorInfeasible(e.to_string()))?;
            let n = Normal::standard();
            (0..Z_N)
                .map(|i| {
                    let u = n.cdf(Z_MIN + i as f64 * Z_STEP).clamp(1e-15, 1.0 - 1e-15);
                    g.inverse_cdf(u)
                })
                .collect()
        } else {
            vec![p.mean_lambda; Z_N]
        };
        let s2 = (1.0 + p.cv_inv_bw * p.cv_inv_bw).ln();
        Ok(Self { lambda_table, mu: p.mean_bw.ln() - s2 / 2.0, sigma: s2.sqrt() })
    }

    fn lambda(&self, z: f64) -> f64 {
        let x = ((z - Z_MIN) / Z_STEP).clamp(0.0, (Z_N - 1) as f64);
        let k = (x.floor() as usize).min(Z_N - 2);
        let f = x - k as f64;
        self.lambda_table[k] * (1.0 - f) + self.lambda_table[k + 1] * f
    }

    fn bw(&self, z: f64) -> f64 {
        (self.mu + self.sigma * z).exp()
    }

    /// Pearson correlation of (hazard, bandwidth) for latent correlation `rho`,
    /// by quadrature. The inner expectation over the bandwidth latent is the
    /// closed-form log-normal mean conditional on the hazard latent.
    fn pearson(&self, rho: f64) -> f64 {
        let n = Normal::standard();
        let (mut w_sum, mut el, mut el2, mut elb) = (0.0, 0.0, 0.0, 0.0);
        let cond_var = self.sigma * self.sigma * (1.0 - rho * rho) / 2.0;
        for i in 0..Z_N {
            let z = Z_MIN + i as f64 * Z_STEP;
            let w = n.pdf(z);
            let l = self.lambda_table[i];
            w_sum += w;
            el += w * l;
            el2 += w * l * l;
            elb += w * l * (self.mu + self.sigma * rho * z + cond_var).exp();
        }
        el /= w_sum;
        el2 /= w_sum;
        elb /= w_sum;
        let s2 = self.sigma * self.sigma;
        let eb = (self.mu + s2 / 2.0).exp();
        let sd_b = eb * (s2.exp() - 1.0).sqrt();
        let sd_l = (el2 - el * el).max(0.0).sqrt();
        (elb - el * eb) / (sd_l * sd_b)
    }
}

/// Latent correlation that produces `target_corr` after the marginal
/// transforms.
pub fn latent_correlation(p: &GeneratorParams) -> Result<f64> {
    if p.cv_lambda == 0.0 || p.cv_inv_bw == 0.0 {
        return if p.target_corr == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::GeneratorInfeasible(format!(
                "correlation {} needs both marginals to vary",
                p.target_corr
            )))
        };
    }
    let m = Marginals::new(p)?;
    let (lo_c, hi_c) = (m.pearson(-1.0), m.pearson(1.0));
    if p.target_corr < lo_c || p.target_corr > hi_c {
        return Err(Error::GeneratorInfeasible(format!(
            "correlation {} outside the reachable range [{lo_c:.3}, {hi_c:.3}] for these CVs",
            p.target_corr
        )));
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if m.pearson(mid) < p.target_corr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn gen_correlated_trace(p: &GeneratorParams, horizon_s: f64, seed: u64) -> Result<CorrelatedTrace> {
    if !(p.target_corr > -1.0 && p.target_corr < 1.0) {
        return Err(Error::OutOfRange { what: "target_corr", value: p.target_corr });
    }
    for (what, v) in [("mean_lambda", p.mean_lambda), ("mean_bw", p.mean_bw), ("bucket_s", p.bucket_s), ("horizon_s", horizon_s)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive { what, value: v });
        }
    }
    if p.cv_lambda < 0.0 || p.cv_inv_bw < 0.0 {
        return Err(Error::OutOfRange { what: "cv", value: p.cv_lambda.min(p.cv_inv_bw) });
    }
    if !(0.0..1.0).contains(&p.ar_phi) {
        return Err(Error::OutOfRange { what: "ar_phi", value: p.ar_phi });
    }
    let n = (horizon_s / p.bucket_s).ceil() as usize;
    let constant = p.cv_lambda == 0.0 && p.cv_inv_bw == 0.0;
    let rho = if constant { 0.0 } else { latent_correlation(p)? };
    let m = Marginals::new(p)?;

    let mut rng = stream(seed, label::HAZARD, 0);
    let innov = (1.0 - p.ar_phi * p.ar_phi).sqrt();
    let cross = (1.0 - rho * rho).sqrt();
    let (mut z1, mut z2) = (0.0f64, 0.0f64);
    let mut lam = Vec::with_capacity(n);
    let mut bw = Vec::with_capacity(n);
    for k in 0..n {
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e3: f64 = StandardNormal.sample(&mut rng);
        let e2 = rho * e1 + cross * e3;
        if k == 0 {
            (z1, z2) = (e1, e2);
        } else {
            z1 = p.ar_phi * z1 + innov * e1;
            z2 = p.ar_phi * z2 + innov * e2;
        }
        lam.push(m.lambda(z1));
        bw.push(m.bw(z2));
    }
    let hazard = HazardTrace::emergency_only(Piecewise::uniform(0.0, p.bucket_s, lam)?)?;
    let bandwidth = BandwidthTrace::new(vec![Piecewise::uniform(0.0, p.bucket_s, bw)?])?;
    Ok(CorrelatedTrace { hazard, bandwidth, constant, latent_rho: rho })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    pub(crate) fn cv(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt() / m
    }

    fn stats(p: &GeneratorParams, seed: u64) -> (f64, f64, f64) {
        let tr = gen_correlated_trace(p, 6048.0 * p.bucket_s, seed).unwrap();
        let s = tr.samples();
        let l: Vec<f64> = s.iter().map(|x| x.lambda).collect();
        let b: Vec<f64> = s.iter().map(|x| x.b_eff).collect();
        let inv: Vec<f64> = b.iter().map(|x| 1.0 / x).collect();
        (pearson(&l, &b), cv(&l), cv(&inv))
    }

    #[test]
    fn hits_measured_statistics() {
        let p = GeneratorParams::default();
        for seed in 0..5 {
            let (c, cl, cb) = stats(&p, seed);
            assert!((c + 0.43).abs() < 0.05, "corr {c}");
            assert!((cl / 0.62 - 1.0).abs() < 0.10, "cv_lambda {cl}");
            assert!((cb / 0.31 - 1.0).abs() < 0.10, "cv_inv {cb}");
        }
    }

    #[test]
    fn independent_case() {
        let p = GeneratorParams { target_corr: 0.0, ..Default::default() };
        let (c, _, _) = stats(&p, 11);
        assert!(c.abs() < 0.05);
        assert!(latent_correlation(&p).unwrap().abs() < 1e-6);
    }

    #[test]
    fn degenerate_cases() {
        let p = GeneratorParams { cv_lambda: 0.0, cv_inv_bw: 0.0, ..Default::default() };
        let tr = gen_correlated_trace(&p, 6000.0, 1).unwrap();
        assert!(tr.constant);
        assert!(tr.lambda().values().iter().all(|&v| (v - p.mean_lambda).abs() < 1e-18));
        let p = GeneratorParams { cv_lambda: 0.0, ..Default::default() };
        assert!(matches!(gen_correlated_trace(&p, 6000.0, 1), Err(Error::GeneratorInfeasible(_))));
        let p = GeneratorParams { target_corr: -0.999, cv_lambda: 2.0, cv_inv_bw: 0.05, ..Default::default() };
        assert!(matches!(gen_correlated_trace(&p, 6000.0, 1), Err(Error::GeneratorInfeasible(_))));
        let p = GeneratorParams { target_corr: 1.0, ..Default::default() };
        assert!(gen_correlated_trace(&p, 6000.0, 1).is_err());
    }

    #[test]
    fn persistent_latent_keeps_marginals() {
        let p = GeneratorParams { ar_phi: 0.9, ..Default::default() };
        let tr = gen_correlated_trace(&p, 60_000.0 * p.bucket_s, 3).unwrap();
        let l: Vec<f64> = tr.lambda().values().to_vec();
        assert!((cv(&l) / 0.62 - 1.0).abs() < 0.10);
    }
}
