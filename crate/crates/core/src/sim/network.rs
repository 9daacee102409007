//! Fluid bandwidth sharing.

const EPS: f64 = 1e-9;

/// One elastic demand in a fill: the links it crosses, its share weight and
/// its rate cap (may be infinite if it crosses at least one link).
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub links: Vec<usize>,
    pub weight: f64,
    pub cap: f64,
}

impl Demand {
    pub fn new(links: Vec<usize>, weight: f64, cap: f64) -> Self {
        Self { links, weight, cap }
    }
}

/// Weighted max-min fair rates by progressive filling. Every demand's rate
/// rises in proportion to its weight until it hits its cap or one of its
/// links saturates.
pub fn weighted_fill(demands: &[Demand], capacity: &[f64]) -> Vec<f64> {
    let n = demands.len();
    let mut rate = vec![0.0; n];
    let mut residual: Vec<f64> = capacity.iter().map(|c| c.max(0.0)).collect();
    let mut active: Vec<bool> = demands.iter().map(|d| d.weight > 0.0 && d.cap > 0.0).collect();
    for (d, a) in demands.iter().zip(active.iter_mut()) {
        assert!(
            !*a || !d.links.is_empty() || d.cap.is_finite(),
            "an unconstrained demand needs a finite cap"
        );
        if d.links.iter().any(|&l| residual[l] <= EPS) {
            *a = false;
        }
    }
    let mut load = vec![0.0; capacity.len()];
    while active.iter().any(|&a| a) {
        load.iter_mut().for_each(|w| *w = 0.0);
        for (d, _) in demands.iter().zip(&active).filter(|(_, a)| **a) {
            for &l in &d.links {
                load[l] += d.weight;
            }
        }
        let mut step = f64::INFINITY;
        for (l, w) in load.iter().enumerate() {
            if *w > 0.0 {
                step = step.min(residual[l] / w);
            }
        }
        for (i, d) in demands.iter().enumerate() {
            if active[i] {
                step = step.min((d.cap - rate[i]) / d.weight);
            }
        }
        let step = step.max(0.0);
        for (i, d) in demands.iter().enumerate() {
            if active[i] {
                rate[i] += step * d.weight;
            }
        }
        for (l, w) in load.iter().enumerate() {
            if *w > 0.0 {
                residual[l] -= step * w;
            }
        }
        let tol = |c: f64| EPS * c.abs().max(1.0);
        for (i, d) in demands.iter().enumerate() {
            if !active[i] {
                continue;
            }
            let at_cap = d.cap - rate[i] <= tol(rate[i]);
            let blocked = d.links.iter().any(|&l| residual[l] <= tol(capacity[l]));
            if at_cap || blocked {
                active[i] = false;
            }
        }
    }
    rate
}
