use crate::error::{ensure_positive, Error, Result};

/// Largest fraction of an assigned slice that checkpoint writes may use.
pub const DEFAULT_WRITE_SHARE: f64 = 0.2;

/// Expected cost per unit time of checkpointing every `interval` seconds.
pub fn local_cost(payload: f64, lambda: f64, bw: f64, interval: f64) -> f64 {
    lambda * interval / 2.0 + payload / (bw * interval)
}

/// Interval minimising [`local_cost`]: `sqrt(2 C / (lambda b))`.
pub fn local_interval(payload: f64, lambda: f64, bw: f64) -> Result<f64> {
    ensure_positive("payload", payload)?;
    ensure_positive("lambda", lambda)?;
    ensure_positive("bandwidth", bw)?;
    Ok((2.0 * payload / (lambda * bw)).sqrt())
}

/// Minimum of [`local_cost`]: `sqrt(2 lambda C / b)`.
pub fn local_optimal_cost(payload: f64, lambda: f64, bw: f64) -> f64 {
    (2.0 * lambda * payload / bw).sqrt()
}

/// Optimal interval clipped to `[C / (share b), 2 loss_budget]`.
///
/// The floor keeps checkpoint writes within `share` of the slice; the cap
/// bounds expected loss. Crossing bounds are reported, not resolved.
pub fn constrained_interval(
    payload: f64,
    lambda: f64,
    bw: f64,
    share: f64,
    loss_budget_s: f64,
) -> Result<f64> {
    if !(share > 0.0 && share < 1.0) {
        return Err(Error::OutOfRange { what: "write share", value: share });
    }
    ensure_positive("loss_budget_s", loss_budget_s)?;
    let free = local_interval(payload, lambda, bw)?;
    let floor = payload / (share * bw);
    let cap = 2.0 * loss_budget_s;
    if floor > cap {
        return Err(Error::InfeasibleInterval { floor, cap });
    }
    Ok(free.clamp(floor, cap))
}

/// Whether a final checkpoint plus restart fits inside the notice window,
/// judged at the pessimistic bandwidth `bw_lower`.
pub fn final_ckpt_feasible(payload: f64, bw_lower: f64, restart_s: f64, notice_s: f64) -> bool {
    bw_lower > 0.0 && payload / bw_lower + restart_s <= notice_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GB, MB};
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(local_interval(2.0, 1.0, 1.0).unwrap(), 2.0);
        let d = local_interval(3.2 * GB, 0.99 / 3600.0, 102.5 * MB).unwrap();
        // sqrt(2 * 3.2e9 / (2.75e-4 * 1.025e8))
        assert!((d - 477.0).abs() < 1.0, "{d}");
        assert_eq!(local_interval(2.0, 4.0, 0.25).unwrap(), local_interval(2.0, 1.0, 1.0).unwrap());
        assert!(local_interval(0.0, 1.0, 1.0).is_err());
        assert!(local_interval(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn clipping() {
        // C = 4, b = 1: floor C/(0.2 b) = 20 s; lambda = 8e-4 gives 100 s free
        assert_eq!(constrained_interval(4.0, 8e-4, 1.0, 0.2, 200.0).unwrap(), 100.0);
        // floor binds: free 10 s, floor C/(0.2 b) = 20 s
        assert_eq!(constrained_interval(4.0, 0.08, 1.0, 0.2, 200.0).unwrap(), 20.0);
        // loss cap binds
        assert_eq!(constrained_interval(4.0, 8e-4, 1.0, 0.2, 30.0).unwrap(), 60.0);
        assert!(matches!(
            constrained_interval(4.0, 0.08, 1.0, 0.2, 5.0),
            Err(Error::InfeasibleInterval { floor, cap }) if floor == 20.0 && cap == 10.0
        ));
        assert!(constrained_interval(4.0, 0.08, 1.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn final_checkpoint_boundary() {
        assert!(final_ckpt_feasible(80.0 * GB, GB, 20.0, 100.0));
        assert!(!final_ckpt_feasible(80.0 * GB, GB, 20.0, 99.9));
        assert!(!final_ckpt_feasible(1.0, GB, 0.0, 0.0));
        assert!(!final_ckpt_feasible(1.0, 0.0, 0.0, 100.0));
    }

    proptest! {
        #[test]
        fn optimum_is_global(c in 1e3..1e11f64, l in 1e-7..1e-1f64, b in 1e5..1e10f64) {
            let d = local_interval(c, l, b).unwrap();
            let best = local_cost(c, l, b, d);
            let closed = local_optimal_cost(c, l, b);
            prop_assert!((best - closed).abs() <= 1e-9 * closed);
            prop_assert!(best <= local_cost(c, l, b, 0.5 * d));
            prop_assert!(best <= local_cost(c, l, b, 2.0 * d));
        }
    }
}
