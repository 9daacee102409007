use crate::error::{Error, Result};

/// A right-open piecewise-constant function of time.
///
/// Segment `k` covers `[breakpoints[k], breakpoints[k + 1])`; the last
/// breakpoint is the end of the horizon, so there is one more breakpoint than
/// there are values.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl Piecewise {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("piecewise series"));
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::Parse(format!(
                "{} breakpoints for {} segments",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("breakpoints must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite segment value".into()));
        }
        Ok(Self { breakpoints, values })
    }

    /// Uniform buckets of `bucket_s` starting at `start`.
    pub fn uniform(start: f64, bucket_s: f64, values: Vec<f64>) -> Result<Self> {
        let breakpoints = (0..=values.len())
            .map(|k| start + k as f64 * bucket_s)
            .collect();
        Self::new(breakpoints, values)
    }

    pub fn constant(start: f64, end: f64, value: f64) -> Result<Self> {
        Self::new(vec![start, end], vec![value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the segment containing `t`; the horizon end maps to the last
    /// segment.
    pub fn segment_at(&self, t: f64) -> Result<usize> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::TraceExtrapolation {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let k = self.breakpoints.partition_point(|&b| b <= t);
        Ok(k.saturating_sub(1).min(self.values.len() - 1))
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.segment_at(t)?])
    }

    /// Value at `t`, holding the last value past the horizon end. The flag is
    /// true when extrapolation happened.
    pub fn value_at_or_last(&self, t: f64) -> (f64, bool) {
        if t > self.end() {
            (*self.values.last().unwrap(), true)
        } else if t < self.start() {
            (self.values[0], true)
        } else {
            (self.values[self.segment_at(t).unwrap()], false)
        }
    }

    /// Exact integral over `[a, b]`, holding the last value past the end.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let start = self.start();
        if a < start {
            total += self.values[0] * (b.min(start) - a);
        }
        for (k, v) in self.values.iter().enumerate() {
            let lo = self.breakpoints[k].max(a);
            let hi = self.breakpoints[k + 1].min(b);
            if hi > lo {
                total += v * (hi - lo);
            }
        }
        let end = self.end();
        if b > end {
            total += self.values.last().unwrap() * (b - a.max(end));
        }
        total
    }

    /// Next breakpoint strictly after `t`, if any.
    pub fn next_change_after(&self, t: f64) -> Option<f64> {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.breakpoints.get(k).copied().filter(|&b| b < self.end())
    }

    /// Time-weighted values over `[a, b]` as `(value, duration)` pairs.
    pub fn weighted_window(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (k, v) in self.values.iter().enumerate() {
            let lo = self.breakpoints[k].max(a);
            let hi = self.breakpoints[k + 1].min(b);
            if hi > lo {
                out.push((*v, hi - lo));
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_integral() {
        let p = Piecewise::new(vec![0.0, 10.0, 30.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(p.value_at(0.0).unwrap(), 1.0);
        assert_eq!(p.value_at(9.999).unwrap(), 1.0);
        assert_eq!(p.value_at(10.0).unwrap(), 3.0);
        assert_eq!(p.value_at(30.0).unwrap(), 3.0);
        assert!(matches!(p.value_at(30.1), Err(Error::TraceExtrapolation { .. })));
        assert_eq!(p.integral(5.0, 20.0), 5.0 + 30.0);
        assert_eq!(p.integral(25.0, 40.0), 15.0 * 3.0);
        assert_eq!(p.next_change_after(0.0), Some(10.0));
        assert_eq!(p.next_change_after(10.0), None);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(Piecewise::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Piecewise::new(vec![0.0], vec![1.0]).is_err());
        assert!(Piecewise::new(vec![0.0], vec![]).is_err());
    }
}
