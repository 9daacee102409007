use crate::error::{Error, Result};
use crate::model::piecewise::Piecewise;
use crate::model::topology::{LinkId, NodeId, Topology};

/// Available bandwidth per link over time, one series per link id.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace {
    links: Vec<Piecewise>,
}

impl BandwidthTrace {
    pub fn new(links: Vec<Piecewise>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Empty("bandwidth trace"));
        }
        for series in &links {
            if series.values().iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Parse("available bandwidth must be positive".into()));
            }
        }
        Ok(Self { links })
    }

    /// Every link holds its full capacity for the whole horizon.
    pub fn at_capacity(topo: &Topology, start: f64, end: f64) -> Result<Self> {
        let links = topo
            .links()
            .iter()
            .map(|l| Piecewise::constant(start, end, l.capacity_bytes_per_s))
            .collect::<Result<_>>()?;
        Self::new(links)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn series(&self, link: LinkId) -> Result<&Piecewise> {
        self.links
            .get(link.0 as usize)
            .ok_or_else(|| Error::UnknownLink(link.to_string()))
    }

    pub fn series_mut(&mut self, link: LinkId) -> Result<&mut Piecewise> {
        self.links
            .get_mut(link.0 as usize)
            .ok_or_else(|| Error::UnknownLink(link.to_string()))
    }

    pub fn available(&self, link: LinkId, t: f64) -> Result<f64> {
        self.series(link)?.value_at(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (LinkId, &Piecewise)> {
        self.links.iter().enumerate().map(|(i, p)| (LinkId(i as u32), p))
    }
}

/// Minimum available bandwidth over the links of the `s -> d` path at `t`.
pub fn bottleneck_bandwidth(
    topo: &Topology,
    traces: &BandwidthTrace,
    s: NodeId,
    d: NodeId,
    t: f64,
) -> Result<f64> {
    let path = topo.path(s, d)?;
    let mut min = f64::INFINITY;
    for &l in path {
        min = min.min(traces.available(l, t)?);
    }
    Ok(min)
}

/// Time to move `payload` bytes at `bw` and restart: `payload / bw + restart`.
pub fn migration_time(payload: f64, bw: f64, restart_s: f64) -> Result<f64> {
    if !(bw > 0.0) {
        return Err(Error::DivisionGuard(bw));
    }
    Ok(payload / bw + restart_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topology::{
        BuildingId, Endpoint, Link, NodeRole, NodeSpec, Switch, Tier,
    };
    use crate::units::MB;
    use proptest::prelude::*;

    fn node(i: u32, b: u32) -> NodeSpec {
        NodeSpec {
            id: NodeId(i),
            building: BuildingId(b),
            role: NodeRole::Provider,
            vram_bytes: 1.0,
            cuda_capability: 8.0,
            load: 0.0,
            write_speed_bytes_per_s: 1.0,
            gpu_slots: 1,
            hazard_profile: i,
        }
    }

    fn link(i: u32, a: Endpoint, b: Endpoint, tier: Tier) -> Link {
        Link { id: LinkId(i), a, b, capacity_bytes_per_s: 1e9, tier }
    }

    /// Two nodes in building 0 and one in building 1, three switch levels.
    fn small() -> Topology {
        let sw = |i: u32| Switch { id: i, name: format!("s{i}") };
        let n = |i: u32| Endpoint::Node(NodeId(i));
        let s = Endpoint::Switch;
        Topology::new(
            vec![node(0, 0), node(1, 0), node(2, 1)],
            vec![sw(0), sw(1), sw(2)],
            vec![
                link(0, n(0), s(1), Tier::Access),
                link(1, n(1), s(1), Tier::Access),
                link(2, n(2), s(2), Tier::Access),
                link(3, s(1), s(0), Tier::Core),
                link(4, s(2), s(0), Tier::Core),
            ],
        )
        .unwrap()
    }

    #[test]
    fn bottleneck_is_min_over_path() {
        let topo = small();
        let vals = [100.0, 70.0, 120.0, 40.0, 80.0];
        let tr = BandwidthTrace::new(
            vals.iter().map(|&v| Piecewise::constant(0.0, 10.0, v * MB).unwrap()).collect(),
        )
        .unwrap();
        // 0 -> 2 crosses links 0, 3, 4, 2: [100, 40, 80, 120]
        assert_eq!(bottleneck_bandwidth(&topo, &tr, NodeId(0), NodeId(2), 0.0).unwrap(), 40.0 * MB);
        assert_eq!(bottleneck_bandwidth(&topo, &tr, NodeId(0), NodeId(1), 0.0).unwrap(), 70.0 * MB);
        assert!(matches!(
            bottleneck_bandwidth(&topo, &tr, NodeId(0), NodeId(7), 0.0),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            bottleneck_bandwidth(&topo, &tr, NodeId(0), NodeId(2), 11.0),
            Err(Error::TraceExtrapolation { .. })
        ));
    }

    #[test]
    fn migration_time_examples() {
        use crate::units::GB;
        assert_eq!(migration_time(80.0 * GB, GB, 20.0).unwrap(), 100.0);
        assert_eq!(migration_time(0.0, GB, 7.0).unwrap(), 7.0);
        let t = migration_time(3.2 * GB, 102.5 * MB, 0.0).unwrap();
        assert!((t - 31.22).abs() < 0.01);
        assert!(matches!(migration_time(1.0, 0.0, 0.0), Err(Error::DivisionGuard(_))));
    }

    proptest! {
        #[test]
        fn migration_time_monotone(c in 0.0..1e10f64, bw in 1.0..1e10f64, tr in 0.0..100.0f64, k in 1.01..10.0f64) {
            let base = migration_time(c, bw, tr).unwrap();
            prop_assert!(migration_time(c, bw * k, tr).unwrap() <= base);
            prop_assert!(migration_time(c * k, bw, tr).unwrap() >= base);
            prop_assert!(migration_time(c, bw, tr + k).unwrap() > base);
        }
    }
}
