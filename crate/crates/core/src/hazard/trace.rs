use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::Piecewise;
use crate::rng::Rng;

/// Empirical notice-period distribution with a hard floor.
#[derive(Debug, Clone, PartialEq)]
pub struct NoticeDist {
    /// Sorted support points; sampling interpolates linearly between them.
    quantiles: Vec<f64>,
    floor_s: f64,
}

impl NoticeDist {
    pub fn from_samples(mut samples: Vec<f64>, floor_s: f64) -> Result<Self> {
        if !(floor_s > 0.0) {
            return Err(Error::NonPositive { what: "tau_min_s", value: floor_s });
        }
        if samples.is_empty() {
            return Err(Error::Empty("notice samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite notice sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        for s in &mut samples {
            *s = s.max(floor_s);
        }
        Ok(Self { quantiles: samples, floor_s })
    }

    /// Log-normal notice periods, tabulated at 199 evenly spaced quantiles.
    pub fn lognormal(median_s: f64, sigma: f64, floor_s: f64) -> Result<Self> {
        use statrs::distribution::{ContinuousCDF, Normal};
        let z = Normal::standard();
        let n = 199;
        let q = (0..n)
            .map(|i| median_s * (sigma * z.inverse_cdf((i as f64 + 0.5) / n as f64)).exp())
            .collect();
        Self::from_samples(q, floor_s)
    }

    /// Every notice equals `notice_s` (itself floored).
    pub fn fixed(notice_s: f64, floor_s: f64) -> Result<Self> {
        Self::from_samples(vec![notice_s], floor_s)
    }

    pub fn floor_s(&self) -> f64 {
        self.floor_s
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.quantiles.len();
        if n == 1 {
            return self.quantiles[0];
        }
        let x = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let k = (x.floor() as usize).min(n - 2);
        let f = x - k as f64;
        self.quantiles[k] * (1.0 - f) + self.quantiles[k + 1] * f
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Piecewise-constant departure intensity of one provider (or a pool).
///
/// `rates` is the intensity of all departures; each departure is scheduled
/// with probability `scheduled_fraction`, so the no-notice hazard is
/// `(1 - scheduled_fraction) * rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardTrace {
    rates: Piecewise,
    scheduled_fraction: f64,
    notice: NoticeDist,
}

impl HazardTrace {
    pub fn new(rates: Piecewise, scheduled_fraction: f64, notice: NoticeDist) -> Result<Self> {
        if rates.values().iter().any(|&r| r < 0.0) {
            return Err(Error::OutOfRange { what: "hazard rate", value: rates.values()[0] });
        }
        if !(0.0..=1.0).contains(&scheduled_fraction) {
            return Err(Error::OutOfRange { what: "scheduled_fraction", value: scheduled_fraction });
        }
        Ok(Self { rates, scheduled_fraction, notice })
    }

    /// Emergency-only trace with the given rates.
    pub fn emergency_only(rates: Piecewise) -> Result<Self> {
        Self::new(rates, 0.0, NoticeDist::fixed(10.0, 10.0)?)
    }

    pub fn rates(&self) -> &Piecewise {
        &self.rates
    }

    pub fn scheduled_fraction(&self) -> f64 {
        self.scheduled_fraction
    }

    pub fn notice(&self) -> &NoticeDist {
        &self.notice
    }

    pub fn start(&self) -> f64 {
        self.rates.start()
    }

    pub fn end(&self) -> f64 {
        self.rates.end()
    }

    /// Total departure intensity at `t`, holding the last value past the end.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.rates.value_at_or_last(t).0
    }

    pub fn emergency_rate_at(&self, t: f64) -> f64 {
        (1.0 - self.scheduled_fraction) * self.rate_at(t)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.values().iter().copied().fold(0.0, f64::max)
    }

    /// Expected departures over `[a, b]`; the flag reports extrapolation past
    /// the trace end.
    pub fn cumulative(&self, a: f64, b: f64) -> (f64, bool) {
        (self.rates.integral(a, b), a < self.start() || b > self.end())
    }

    /// Same trace with every rate multiplied by `k` from `t0` onwards.
    pub fn scaled_from(&self, t0: f64, k: f64) -> Result<Self> {
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        let old_b = self.rates.breakpoints();
        for (i, &v) in self.rates.values().iter().enumerate() {
            let (lo, hi) = (old_b[i], old_b[i + 1]);
            if lo < t0 && t0 < hi {
                bps.extend([lo, t0]);
                vals.extend([v, v * k]);
            } else {
                bps.push(lo);
                vals.push(if lo >= t0 { v * k } else { v });
            }
        }
        bps.push(self.end());
        Self::new(Piecewise::new(bps, vals)?, self.scheduled_fraction, self.notice.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{label, stream};

    #[test]
    fn notice_floor_and_quantiles() {
        let d = NoticeDist::lognormal(120.0, 1.0, 10.0).unwrap();
        assert!((d.median() - 120.0).abs() < 1e-6);
        let mut rng = stream(3, label::NOTICE, 0);
        for _ in 0..1000 {
            assert!(d.sample(&mut rng) >= 10.0);
        }
        assert!(NoticeDist::fixed(5.0, 0.0).is_err());
        assert_eq!(NoticeDist::fixed(5.0, 10.0).unwrap().median(), 10.0);
    }

    #[test]
    fn split_and_scale() {
        let h = HazardTrace::new(
            Piecewise::new(vec![0.0, 10.0, 20.0], vec![1.0, 2.0]).unwrap(),
            0.25,
            NoticeDist::fixed(30.0, 10.0).unwrap(),
        )
        .unwrap();
        assert_eq!(h.emergency_rate_at(15.0), 1.5);
        let s = h.scaled_from(5.0, 3.0).unwrap();
        assert_eq!(s.rate_at(4.0), 1.0);
        assert_eq!(s.rate_at(6.0), 3.0);
        assert_eq!(s.rate_at(12.0), 6.0);
        assert_eq!(s.cumulative(0.0, 20.0).0, 5.0 + 15.0 + 60.0);
        assert!(HazardTrace::new(Piecewise::constant(0.0, 1.0, 1.0).unwrap(), 1.5, h.notice().clone()).is_err());
    }
}
