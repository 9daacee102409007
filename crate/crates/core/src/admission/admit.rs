use crate::admission::flow::{BandwidthBudget, FlowStatus, MigrationFlow, TrafficClass};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Admission {
    pub admitted: Vec<MigrationFlow>,
    pub degraded: Vec<MigrationFlow>,
}

/// A flow together with the indices of the capacity-limited links it crosses.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFlow {
    pub flow: MigrationFlow,
    pub links: Vec<usize>,
}

fn rel_eps(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

/// Progressive filling: raise every unfrozen flow at the same pace until a
/// flow reaches its headroom or a link runs out. Returns the increments.
fn progressive_fill(paths: &[&[usize]], headroom: &[f64], capacity: &mut [f64]) -> Vec<f64> {
    let n = paths.len();
    let mut add = vec![0.0; n];
    let mut frozen: Vec<bool> = headroom.iter().map(|&h| !(h > 0.0)).collect();
    let scale = capacity.iter().copied().filter(|c| c.is_finite()).fold(1.0, f64::max);
    for (i, p) in paths.iter().enumerate() {
        if p.iter().any(|&l| capacity[l] <= rel_eps(scale)) {
            frozen[i] = true;
        }
    }
    loop {
        let mut users = vec![0usize; capacity.len()];
        let mut any = false;
        for (i, p) in paths.iter().enumerate() {
            if !frozen[i] {
                any = true;
                for &l in *p {
                    users[l] += 1;
                }
            }
        }
        if !any {
            break;
        }
        let mut step = f64::INFINITY;
        for (l, &u) in users.iter().enumerate() {
            if u > 0 {
                step = step.min(capacity[l] / u as f64);
            }
        }
        for i in (0..n).filter(|&i| !frozen[i]) {
            step = step.min(headroom[i] - add[i]);
        }
        if !step.is_finite() {
            break;
        }
        let step = step.max(0.0);
        for i in (0..n).filter(|&i| !frozen[i]) {
            add[i] += step;
        }
        for (l, &u) in users.iter().enumerate() {
            capacity[l] -= step * u as f64;
        }
        for (i, p) in paths.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            let full = headroom[i] - add[i] <= rel_eps(headroom[i]);
            let blocked = p.iter().any(|&l| capacity[l] <= rel_eps(scale));
            if full || blocked {
                frozen[i] = true;
            }
        }
    }
    add
}

/// Max-min split of `capacity` among flows with the given headroom.
pub fn max_min_fill(headroom: &[f64], capacity: f64) -> Vec<f64> {
    let path = [0usize];
    let paths: Vec<&[usize]> = headroom.iter().map(|_| &path[..]).collect();
    progressive_fill(&paths, headroom, &mut [capacity])
}

fn edf_key(f: &MigrationFlow, now: f64) -> (f64, u64) {
    (now + f.notice_s, f.id.0)
}

/// Single-bottleneck admission. `notice_s` of each flow is the notice left
/// at `now`.
///
/// Planned flows are taken in deadline order while their summed minimum
/// rates fit the migration share; the first flow that does not fit, and
/// every later one, is degraded. Admitted flows then split what is left
/// max-min, each capped by its path. Pre-sync flows share only what planned
/// flows leave unused. Other classes carry no transfer and are returned
/// degraded.
pub fn admit(flows: &[MigrationFlow], budget: &BandwidthBudget, now: f64) -> Admission {
    let mut out = Admission::default();
    let mut planned = Vec::new();
    let mut presync = Vec::new();
    for f in flows {
        let mut f = f.clone();
        f.min_rate = f.required_rate();
        match f.class {
            TrafficClass::Planned if f.has_deadline_slack() && f.min_rate <= f.path_cap => planned.push(f),
            TrafficClass::Presync => presync.push(f),
            _ => {
                f.status = FlowStatus::Degraded;
                f.assigned_rate = 0.0;
                out.degraded.push(f);
            }
        }
    }
    planned.sort_by(|a, b| edf_key(a, now).partial_cmp(&edf_key(b, now)).unwrap());
    let mut used = 0.0;
    let mut cut = planned.len();
    for (k, f) in planned.iter().enumerate() {
        if used + f.min_rate > budget.migration + rel_eps(budget.migration) {
            cut = k;
            break;
        }
        used += f.min_rate;
    }
    for mut f in planned.drain(cut..) {
        f.status = FlowStatus::Degraded;
        f.assigned_rate = 0.0;
        out.degraded.push(f);
    }
    let mut residual = (budget.migration - used).max(0.0);
    let head: Vec<f64> = planned.iter().map(|f| f.path_cap - f.min_rate).collect();
    let extra = max_min_fill(&head, residual);
    for (f, x) in planned.iter_mut().zip(&extra) {
        f.assigned_rate = f.min_rate + x;
        f.status = FlowStatus::Admitted;
        residual -= x;
    }
    out.admitted.extend(planned);
    presync.sort_by_key(|f| f.id);
    let head: Vec<f64> = presync.iter().map(|f| f.path_cap).collect();
    let extra = max_min_fill(&head, residual.max(0.0));
    for (mut f, x) in presync.into_iter().zip(extra) {
        f.min_rate = 0.0;
        f.assigned_rate = x;
        f.status = FlowStatus::Admitted;
        out.admitted.push(f);
    }
    out
}

/// Admission over several capacity-limited links. A planned flow is
/// admitted in deadline order if its minimum rate fits on every link it
/// crosses given the flows admitted before it; flows that do not fit are
/// skipped and degraded. Residual capacity is then filled max-min across
/// links, each flow capped by its `path_cap`, planned before pre-sync.
pub fn admit_network(flows: &[NetworkFlow], capacity: &[f64], now: f64) -> Admission {
    let mut out = Admission::default();
    let mut cap = capacity.to_vec();
    let mut planned = Vec::new();
    let mut presync = Vec::new();
    for nf in flows {
        let mut nf = nf.clone();
        nf.flow.min_rate = nf.flow.required_rate();
        match nf.flow.class {
            TrafficClass::Planned if nf.flow.has_deadline_slack() && nf.flow.min_rate <= nf.flow.path_cap => {
                planned.push(nf)
            }
            TrafficClass::Presync => presync.push(nf),
            _ => {
                nf.flow.status = FlowStatus::Degraded;
                nf.flow.assigned_rate = 0.0;
                out.degraded.push(nf.flow);
            }
        }
    }
    planned.sort_by(|a, b| edf_key(&a.flow, now).partial_cmp(&edf_key(&b.flow, now)).unwrap());
    let mut admitted = Vec::new();
    for mut nf in planned {
        let r = nf.flow.min_rate;
        if nf.links.iter().all(|&l| cap[l] + rel_eps(capacity[l]) >= r) {
            for &l in &nf.links {
                cap[l] = (cap[l] - r).max(0.0);
            }
            admitted.push(nf);
        } else {
            nf.flow.status = FlowStatus::Degraded;
            nf.flow.assigned_rate = 0.0;
            out.degraded.push(nf.flow);
        }
    }
    let paths: Vec<&[usize]> = admitted.iter().map(|nf| nf.links.as_slice()).collect();
    let head: Vec<f64> = admitted.iter().map(|nf| nf.flow.path_cap - nf.flow.min_rate).collect();
    let extra = progressive_fill(&paths, &head, &mut cap);
    for (nf, x) in admitted.iter_mut().zip(extra) {
        nf.flow.assigned_rate = nf.flow.min_rate + x;
        nf.flow.status = FlowStatus::Admitted;
    }
    out.admitted.extend(admitted.into_iter().map(|nf| nf.flow));
    presync.sort_by_key(|nf| nf.flow.id);
    let paths: Vec<&[usize]> = presync.iter().map(|nf| nf.links.as_slice()).collect();
    let head: Vec<f64> = presync.iter().map(|nf| nf.flow.path_cap).collect();
    let extra = progressive_fill(&paths, &head, &mut cap);
    for (nf, x) in presync.into_iter().zip(extra) {
        let mut f = nf.flow;
        f.min_rate = 0.0;
        f.assigned_rate = x;
        f.status = FlowStatus::Admitted;
        out.admitted.push(f);
    }
    out
}

/// Spreads start times of admitted flows `notice_window_s / K` apart in
/// deadline order, pulling an offset earlier when it would push completion
/// past the flow's notice.
pub fn stagger(admitted: &mut [MigrationFlow], notice_window_s: f64) {
    let k = admitted.len();
    if k == 0 {
        return;
    }
    admitted.sort_by(|a, b| edf_key(a, 0.0).partial_cmp(&edf_key(b, 0.0)).unwrap());
    let delta = notice_window_s / k as f64;
    for (j, f) in admitted.iter_mut().enumerate() {
        let transfer = if f.assigned_rate > 0.0 { f.payload / f.assigned_rate } else { f64::INFINITY };
        let latest = (f.notice_s - f.restart_s - transfer).max(0.0);
        f.start_offset_s = (j as f64 * delta).min(latest);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admission::flow::FlowId;
    use crate::model::{JobId, NodeId};
    use proptest::prelude::*;

    fn flow(id: u64, payload: f64, notice: f64, restart: f64) -> MigrationFlow {
        MigrationFlow::new(FlowId(id), JobId(id as u32), NodeId(0), NodeId(1), payload, notice, restart, TrafficClass::Planned, 0.0)
    }

    #[test]
    fn single_flow_takes_path_cap() {
        let mut f = flow(1, 50.0, 60.0, 10.0); // min rate 1
        f.path_cap = 2.0;
        let b = BandwidthBudget::new(10.0, 3.0, 0.3).unwrap();
        let a = admit(&[f], &b, 0.0);
        assert_eq!(a.admitted.len(), 1);
        assert_eq!(a.admitted[0].assigned_rate, 2.0);
        assert!(admit(&[], &b, 0.0).admitted.is_empty());
    }

    #[test]
    fn edf_greedy_degrades_latest_deadline() {
        let b = BandwidthBudget::new(10.0, 3.0, 0.3).unwrap();
        // min rates 3, 3, 3 with deadlines 40, 20, 30
        let flows = [flow(1, 90.0, 40.0, 10.0), flow(2, 30.0, 20.0, 10.0), flow(3, 60.0, 30.0, 10.0)];
        let a = admit(&flows, &b, 0.0);
        let ids: Vec<u64> = a.admitted.iter().map(|f| f.id.0).collect();
        assert_eq!(ids, vec![2, 3]);
        assert_eq!(a.degraded.len(), 1);
        assert_eq!(a.degraded[0].id, FlowId(1));
        // residual 1 split equally
        assert!(a.admitted.iter().all(|f| (f.assigned_rate - 3.5).abs() < 1e-12));
    }

    #[test]
    fn no_slack_is_degraded_and_presync_is_residual() {
        let b = BandwidthBudget::new(10.0, 3.0, 0.3).unwrap();
        let mut p = flow(9, 10.0, f64::INFINITY, 0.0);
        p.class = TrafficClass::Presync;
        let mut capped = flow(1, 50.0, 60.0, 10.0);
        capped.path_cap = 2.0;
        let a = admit(&[flow(2, 10.0, 5.0, 10.0), capped, p], &b, 0.0);
        assert_eq!(a.degraded.len(), 1);
        let pre = a.admitted.iter().find(|f| f.class == TrafficClass::Presync).unwrap();
        assert!((pre.assigned_rate - 5.0).abs() < 1e-12);
    }

    #[test]
    fn max_min_with_caps() {
        let r = max_min_fill(&[1.0, 10.0, 10.0], 9.0);
        assert_eq!(r, vec![1.0, 4.0, 4.0]);
        let r = max_min_fill(&[1.0, 1.0], 9.0);
        assert_eq!(r, vec![1.0, 1.0]);
    }

    #[test]
    fn network_admission_respects_links() {
        // two links of 5; flow a crosses both, b only link 0, c only link 1
        let nf = |f: MigrationFlow, links: Vec<usize>| NetworkFlow { flow: f, links };
        let flows = [
            nf(flow(1, 60.0, 30.0, 10.0), vec![0, 1]), // 3
            nf(flow(2, 60.0, 40.0, 10.0), vec![0]),    // 2
            nf(flow(3, 90.0, 40.0, 10.0), vec![1]),    // 3, does not fit
        ];
        let a = admit_network(&flows, &[5.0, 5.0], 0.0);
        assert_eq!(a.degraded.iter().map(|f| f.id.0).collect::<Vec<_>>(), vec![3]);
        let rate = |id| a.admitted.iter().find(|f| f.id.0 == id).unwrap().assigned_rate;
        // link 0 is exactly full, so neither flow on it gets residual
        assert_eq!((rate(1), rate(2)), (3.0, 2.0));
        let a = admit_network(&flows[..1], &[5.0, 5.0], 0.0);
        assert!((a.admitted[0].assigned_rate - 5.0).abs() < 1e-12);
    }

    #[test]
    fn stagger_examples() {
        let mut one = vec![flow(1, 10.0, 100.0, 0.0)];
        one[0].assigned_rate = 1.0;
        stagger(&mut one, 120.0);
        assert_eq!(one[0].start_offset_s, 0.0);

        let mut four: Vec<_> = (0..4).map(|i| {
            let mut f = flow(i, 10.0, 1000.0 + i as f64, 0.0);
            f.assigned_rate = 1.0;
            f
        }).collect();
        stagger(&mut four, 120.0);
        let offs: Vec<f64> = four.iter().map(|f| f.start_offset_s).collect();
        assert_eq!(offs, vec![0.0, 30.0, 60.0, 90.0]);

        // last flow can wait at most 50 - 5 - 10 = 35 s
        four[3].notice_s = 2000.0;
        let mut tight = four.clone();
        tight[3].notice_s = 50.0;
        tight[3].restart_s = 5.0;
        stagger(&mut tight, 120.0);
        for f in &tight {
            assert!(f.start_offset_s + f.payload / f.assigned_rate + f.restart_s <= f.notice_s + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn admission_monotone_in_budget(
            raw in prop::collection::vec((1.0..100.0f64, 11.0..200.0f64), 0..12),
            total in 1.0..50.0f64,
            more in 0.0..50.0f64,
        ) {
            let flows: Vec<_> = raw.iter().enumerate().map(|(i, &(c, tau))| flow(i as u64, c, tau, 10.0)).collect();
            let small = admit(&flows, &BandwidthBudget::new(total, 0.0, 0.3).unwrap(), 0.0);
            let big = admit(&flows, &BandwidthBudget::new(total + more, 0.0, 0.3).unwrap(), 0.0);
            for f in &small.admitted {
                prop_assert!(big.admitted.iter().any(|g| g.id == f.id));
            }
        }

        #[test]
        fn admitted_rates_cover_minimum_and_fit(
            raw in prop::collection::vec((1.0..100.0f64, 11.0..200.0f64, 0.5..20.0f64), 0..12),
            total in 1.0..80.0f64,
        ) {
            let flows: Vec<_> = raw.iter().enumerate().map(|(i, &(c, tau, cap))| {
                let mut f = flow(i as u64, c, tau, 10.0);
                f.path_cap = cap;
                f
            }).collect();
            let b = BandwidthBudget::new(total, 3.0, 0.3).unwrap();
            let a = admit(&flows, &b, 0.0);
            let sum: f64 = a.admitted.iter().map(|f| f.assigned_rate).sum();
            prop_assert!(sum <= b.migration * (1.0 + 1e-9) + 1e-9);
            for f in &a.admitted {
                prop_assert!(f.assigned_rate >= f.min_rate);
                prop_assert!(f.assigned_rate <= f.path_cap * (1.0 + 1e-9));
                // completes before its notice at the assigned rate
                prop_assert!(f.payload / f.assigned_rate + f.restart_s <= f.notice_s * (1.0 + 1e-9));
            }
            // uncapped flows share the residual equally
            let free: Vec<&MigrationFlow> = a.admitted.iter().filter(|f| f.assigned_rate < f.path_cap * (1.0 - 1e-9)).collect();
            for w in free.windows(2) {
                let (x, y) = (w[0].assigned_rate - w[0].min_rate, w[1].assigned_rate - w[1].min_rate);
                prop_assert!((x - y).abs() <= 1e-9 * x.max(y).max(1.0));
            }
        }

        #[test]
        fn progressive_fill_matches_iterative_oracle(caps in prop::collection::vec(0.0..10.0f64, 1..8), total in 0.0..40.0f64) {
            // oracle: repeatedly give every unsaturated flow an equal slice
            let n = caps.len();
            let mut got = vec![0.0; n];
            let mut left = total;
            for _ in 0..n + 1 {
                let open: Vec<usize> = (0..n).filter(|&i| caps[i] - got[i] > 1e-12).collect();
                if open.is_empty() || left <= 1e-12 { break; }
                let share = left / open.len() as f64;
                for &i in &open {
                    let x = share.min(caps[i] - got[i]);
                    got[i] += x;
                    left -= x;
                }
            }
            let r = max_min_fill(&caps, total);
            for i in 0..n {
                prop_assert!((r[i] - got[i]).abs() < 1e-9, "{:?} vs {:?}", r, got);
            }
        }
    }
}
