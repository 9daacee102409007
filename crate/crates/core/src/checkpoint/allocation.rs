use crate::error::{ensure_positive, Error, Result};

/// Job entering a capped allocation: hazard, payload and per-job rate cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxedJob {
    pub lambda: f64,
    pub payload: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rates: Vec<f64>,
    /// Jobs pinned at their cap.
    pub capped: Vec<bool>,
    /// Fix-and-resolve rounds used.
    pub rounds: usize,
}

fn weights(jobs: impl Iterator<Item = (f64, f64)>) -> Result<Vec<f64>> {
    jobs.map(|(l, c)| {
        let w = l * c;
        if w > 0.0 && w.is_finite() {
            Ok(w.cbrt())
        } else {
            Err(Error::NonPositive { what: "lambda * payload", value: w })
        }
    })
    .collect()
}

/// Splits `budget` in proportion to `(lambda * payload)^(1/3)`.
pub fn cube_root_allocation(jobs: &[(f64, f64)], budget: f64) -> Result<Vec<f64>> {
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    ensure_positive("budget", budget)?;
    let w = weights(jobs.iter().copied())?;
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|x| budget * x / total).collect())
}

/// Summed optimal per-job cost `sum sqrt(2 lambda C / b)` at rates `b`.
pub fn aggregate_cost(jobs: &[(f64, f64)], rates: &[f64]) -> f64 {
    jobs.iter()
        .zip(rates)
        .map(|(&(l, c), &b)| (2.0 * l * c / b).sqrt())
        .sum()
}

/// Closed-form minimum of [`aggregate_cost`] over the budget simplex.
pub fn cube_root_cost(jobs: &[(f64, f64)], budget: f64) -> f64 {
    let s: f64 = jobs.iter().map(|&(l, c)| (l * c).cbrt()).sum();
    (2.0 / budget).sqrt() * s.powf(1.5)
}

/// Cube-root split with per-job caps: pin every job whose share exceeds
/// its cap, then re-split what is left among the rest, until nothing
/// exceeds its cap.
pub fn water_fill_boxed(jobs: &[BoxedJob], budget: f64) -> Result<Allocation> {
    let k = jobs.len();
    if k == 0 {
        return Ok(Allocation { rates: Vec::new(), capped: Vec::new(), rounds: 0 });
    }
    ensure_positive("budget", budget)?;
    // an infinite cap means no cap
    if let Some(j) = jobs.iter().find(|j| !(j.cap > 0.0)) {
        return Err(Error::NonPositive { what: "cap", value: j.cap });
    }
    let w = weights(jobs.iter().map(|j| (j.lambda, j.payload)))?;
    let mut rates = vec![0.0; k];
    let mut capped = vec![false; k];
    let mut residual = budget;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let active: Vec<usize> = (0..k).filter(|&i| !capped[i]).collect();
        if active.is_empty() {
            break;
        }
        let total: f64 = active.iter().map(|&i| w[i]).sum();
        for &i in &active {
            rates[i] = residual * w[i] / total;
        }
        let violators: Vec<usize> = active.into_iter().filter(|&i| rates[i] > jobs[i].cap).collect();
        if violators.is_empty() {
            break;
        }
        for i in violators {
            capped[i] = true;
            rates[i] = jobs[i].cap;
            residual -= jobs[i].cap;
        }
    }
    Ok(Allocation { rates, capped, rounds })
}
