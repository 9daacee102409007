use crate::error::{ensure_positive, Error, Result};

/// Sample statistics of a joint (hazard, bandwidth) trace that determine how
/// much a state-dependent interval beats the best fixed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    pub mean_lambda: f64,
    /// Mean of `1 / bandwidth`.
    pub mean_theta: f64,
    /// Mean of `sqrt(lambda / bandwidth)`.
    pub mean_w: f64,
    /// `mean_lambda * mean_theta - mean_w^2`, never negative.
    pub cs_defect: f64,
    /// Fixed-interval cost over adaptive cost, `>= 1`.
    pub predicted_ratio: f64,
    pub samples: usize,
}

impl GapStats {
    /// Expected cost rate of the adaptive policy for payload `c`.
    pub fn adaptive_cost(&self, c: f64) -> f64 {
        (2.0 * c).sqrt() * self.mean_w
    }

    /// Expected cost rate of the best fixed interval for payload `c`.
    pub fn fixed_cost(&self, c: f64) -> f64 {
        (2.0 * c * self.mean_lambda * self.mean_theta).sqrt()
    }

    /// `fixed_cost - adaptive_cost`, written through the defect.
    pub fn absolute_gap(&self, c: f64) -> f64 {
        (2.0 * c).sqrt() * self.cs_defect
            / ((self.mean_lambda * self.mean_theta).sqrt() + self.mean_w)
    }
}

pub fn adaptivity_gap(samples: &[(f64, f64)]) -> Result<GapStats> {
    if samples.is_empty() {
        return Err(Error::Empty("joint trace"));
    }
    let n = samples.len() as f64;
    let (mut sl, mut st, mut sw) = (0.0, 0.0, 0.0);
    for &(l, b) in samples {
        ensure_positive("lambda sample", l)?;
        ensure_positive("bandwidth sample", b)?;
        sl += l;
        st += 1.0 / b;
        sw += (l / b).sqrt();
    }
    let (mean_lambda, mean_theta, mean_w) = (sl / n, st / n, sw / n);
    let cs_defect = (mean_lambda * mean_theta - mean_w * mean_w).max(0.0);
    let predicted_ratio = (1.0 + cs_defect / (mean_w * mean_w)).sqrt();
    Ok(GapStats { mean_lambda, mean_theta, mean_w, cs_defect, predicted_ratio, samples: samples.len() })
}

/// True where the network, not the local write speed, limits checkpoint
/// throughput.
pub fn label_binding(bandwidth: &[f64], write_speed: f64) -> Vec<bool> {
    bandwidth.iter().map(|&b| b < write_speed).collect()
}

/// Best fixed interval given mean hazard and mean inverse bandwidth:
/// `sqrt(2 C theta / lambda)`.
pub fn tv_fixed_interval(mean_lambda: f64, mean_theta: f64, payload: f64) -> Result<f64> {
    ensure_positive("mean_lambda", mean_lambda)?;
    ensure_positive("mean_theta", mean_theta)?;
    ensure_positive("payload", payload)?;
    Ok((2.0 * payload * mean_theta / mean_lambda).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::local_interval;
    use proptest::prelude::*;

    #[test]
    fn constant_trace_has_no_gap() {
        let g = adaptivity_gap(&[(2e-4, 1e8); 50]).unwrap();
        assert!((g.predicted_ratio - 1.0).abs() < 1e-9);
        assert!(g.cs_defect.abs() < 1e-9 * g.mean_lambda * g.mean_theta);
        let fixed = tv_fixed_interval(g.mean_lambda, g.mean_theta, 3e9).unwrap();
        let local = local_interval(3e9, 2e-4, 1e8).unwrap();
        assert!((fixed - local).abs() < 1e-9 * local);
    }

    #[test]
    fn two_point_trace() {
        let g = adaptivity_gap(&[(1.0, 1.0), (4.0, 4.0)]).unwrap();
        assert_eq!(g.mean_lambda, 2.5);
        assert_eq!(g.mean_theta, 0.625);
        assert_eq!(g.mean_w, 1.0);
        assert!((g.predicted_ratio - 1.25).abs() < 1e-12);
        let c = 3.0;
        assert!((g.fixed_cost(c) - g.adaptive_cost(c) - g.absolute_gap(c)).abs() < 1e-12);
    }

    #[test]
    fn errors_and_fixed_interval() {
        assert!(adaptivity_gap(&[]).is_err());
        assert!(adaptivity_gap(&[(1.0, 0.0)]).is_err());
        assert_eq!(tv_fixed_interval(1.0, 1.0, 2.0).unwrap(), 2.0);
        assert_eq!(label_binding(&[1.0, 3.0], 2.0), vec![true, false]);
    }

    proptest! {
        #[test]
        fn ratio_at_least_one(s in prop::collection::vec((1e-6..1e-2f64, 1e5..1e9f64), 1..200)) {
            let g = adaptivity_gap(&s).unwrap();
            prop_assert!(g.predicted_ratio >= 1.0);
            prop_assert!(g.cs_defect >= 0.0);
        }

        #[test]
        fn constant_product_means_ratio_one(ls in prop::collection::vec(1e-6..1e-2f64, 1..100), k in 1e2..1e6f64) {
            // bandwidth proportional to 1/lambda keeps lambda * b fixed
            let s: Vec<_> = ls.iter().map(|&l| (l, k / l)).collect();
            let g = adaptivity_gap(&s).unwrap();
            prop_assert!((g.predicted_ratio - 1.0).abs() < 1e-9);
        }
    }
}
