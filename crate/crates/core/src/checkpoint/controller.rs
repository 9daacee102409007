use crate::checkpoint::allocation::{water_fill_boxed, BoxedJob};
use crate::checkpoint::interval::{constrained_interval, final_ckpt_feasible};
use crate::error::{Error, Result};
use crate::model::JobId;

/// Controller view of one job at a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickJob {
    pub id: JobId,
    pub payload: f64,
    pub loss_budget_s: f64,
    pub restart_s: f64,
    /// Upper confidence bound on the job's no-notice hazard.
    pub lambda_upper: f64,
    /// Local write-speed or administrator cap.
    pub cap: f64,
    /// Remaining notice if the host has announced a reclaim.
    pub notice_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkptDemand {
    pub job: JobId,
    pub payload: f64,
    pub rate: f64,
    pub interval_s: f64,
    pub loss_budget_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalCkpt {
    pub job: JobId,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Infeasible {
    pub job: JobId,
    pub floor_s: f64,
    pub cap_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickOutput {
    pub demands: Vec<CkptDemand>,
    pub final_ckpts: Vec<FinalCkpt>,
    pub infeasible: Vec<Infeasible>,
}

/// One controller tick over the jobs sharing `budget_lower`.
///
/// Shares come from the capped cube-root split. Jobs under notice whose
/// final checkpoint fits at their share are emitted and leave the periodic
/// pool; the split is then recomputed once over the remaining jobs, which
/// receive clipped intervals.
pub fn adaptive_ckpt_tick(jobs: &[TickJob], budget_lower: f64, share: f64) -> Result<TickOutput> {
    let mut out = TickOutput::default();
    if jobs.is_empty() {
        return Ok(out);
    }
    let boxed = |js: &[&TickJob]| -> Vec<BoxedJob> {
        js.iter()
            .map(|j| BoxedJob { lambda: j.lambda_upper, payload: j.payload, cap: j.cap })
            .collect()
    };
    let all: Vec<&TickJob> = jobs.iter().collect();
    let first = water_fill_boxed(&boxed(&all), budget_lower)?;
    let mut rest = Vec::new();
    for (j, &b) in all.iter().zip(&first.rates) {
        match j.notice_s {
            Some(tau) if final_ckpt_feasible(j.payload, b, j.restart_s, tau) => {
                out.final_ckpts.push(FinalCkpt { job: j.id, rate: b });
            }
            _ => rest.push(*j),
        }
    }
    let rates = if rest.len() == all.len() {
        first.rates
    } else {
        water_fill_boxed(&boxed(&rest), budget_lower)?.rates
    };
    for (j, b) in rest.into_iter().zip(rates) {
        match constrained_interval(j.payload, j.lambda_upper, b, share, j.loss_budget_s) {
            Ok(interval_s) => out.demands.push(CkptDemand {
                job: j.id,
                payload: j.payload,
                rate: b,
                interval_s,
                loss_budget_s: j.loss_budget_s,
            }),
            Err(Error::InfeasibleInterval { floor, cap }) => {
                out.infeasible.push(Infeasible { job: j.id, floor_s: floor, cap_s: cap })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::local_interval;

    fn job(id: u32, payload: f64, lambda: f64) -> TickJob {
        TickJob {
            id: JobId(id),
            payload,
            loss_budget_s: 1e6,
            restart_s: 10.0,
            lambda_upper: lambda,
            cap: f64::INFINITY,
            notice_s: None,
        }
    }

    #[test]
    fn single_job_gets_whole_budget() {
        let out = adaptive_ckpt_tick(&[job(0, 1e9, 1e-4)], 1e8, 0.2).unwrap();
        assert_eq!(out.demands.len(), 1);
        let d = out.demands[0];
        assert_eq!(d.rate, 1e8);
        assert_eq!(d.interval_s, local_interval(1e9, 1e-4, 1e8).unwrap());
    }

    #[test]
    fn notice_job_emits_and_other_takes_budget() {
        // equal weights: each gets 5e7 at first; 1e9 / 5e7 + 10 = 30 s <= 60 s
        let mut a = job(0, 1e9, 1e-4);
        a.notice_s = Some(60.0);
        let b = job(1, 1e9, 1e-4);
        let out = adaptive_ckpt_tick(&[a, b], 1e8, 0.2).unwrap();
        assert_eq!(out.final_ckpts, vec![FinalCkpt { job: JobId(0), rate: 5e7 }]);
        assert_eq!(out.demands.len(), 1);
        assert_eq!(out.demands[0].job, JobId(1));
        assert_eq!(out.demands[0].rate, 1e8);

        // too little notice: stays in the periodic pool
        a.notice_s = Some(25.0);
        let out = adaptive_ckpt_tick(&[a, b], 1e8, 0.2).unwrap();
        assert!(out.final_ckpts.is_empty());
        assert_eq!(out.demands.len(), 2);
    }

    #[test]
    fn capped_job_matches_water_fill() {
        let mut jobs = [job(0, 8e9, 1e-4), job(1, 1e9, 1e-4), job(2, 1e9, 1e-4)];
        jobs[0].cap = 2e7;
        let out = adaptive_ckpt_tick(&jobs, 1.2e8, 0.2).unwrap();
        let rates: Vec<f64> = out.demands.iter().map(|d| d.rate).collect();
        assert_eq!(rates, vec![2e7, 5e7, 5e7]);
        for d in &out.demands {
            let free = local_interval(d.payload, 1e-4, d.rate).unwrap();
            assert_eq!(d.interval_s, free.max(d.payload / (0.2 * d.rate)));
        }
    }

    #[test]
    fn crossing_bounds_are_reported() {
        let mut j = job(0, 1e9, 1e-4);
        j.loss_budget_s = 1.0;
        let out = adaptive_ckpt_tick(&[j], 1e8, 0.2).unwrap();
        assert!(out.demands.is_empty());
        assert_eq!(out.infeasible.len(), 1);
        assert_eq!(out.infeasible[0].floor_s, 50.0);
    }
}
