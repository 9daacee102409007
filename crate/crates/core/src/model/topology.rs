//! Campus topology: provider nodes, switches and tiered links.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::units::{GB, GBPS, MB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BuildingId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Access,
    Distribution,
    Core,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    /// GPU provider that may host jobs and may be reclaimed.
    #[default]
    Provider,
    /// Building checkpoint store; never reclaimed, never hosts jobs.
    Store,
}

/// A provider (or store) host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub building: BuildingId,
    #[serde(default)]
    pub role: NodeRole,
    pub vram_bytes: f64,
    pub cuda_capability: f64,
    #[serde(default)]
    pub load: f64,
    /// Per-job checkpoint write cap.
    pub write_speed_bytes_per_s: f64,
    #[serde(default = "default_slots")]
    pub gpu_slots: u32,
    #[serde(default)]
    pub hazard_profile: u32,
}

fn default_slots() -> u32 {
    1
}

impl NodeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.vram_bytes > 0.0) {
            return Err(Error::Topology(format!("{}: vram_bytes must be > 0", self.id)));
        }
        if !(self.write_speed_bytes_per_s > 0.0) {
            return Err(Error::Topology(format!("{}: write speed must be > 0", self.id)));
        }
        if !(0.0..=1.0).contains(&self.load) {
            return Err(Error::Topology(format!("{}: load must lie in [0,1]", self.id)));
        }
        Ok(())
    }

    pub fn is_provider(&self) -> bool {
        self.role == NodeRole::Provider
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Endpoint {
    Node(NodeId),
    Switch(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: LinkId,
    pub a: Endpoint,
    pub b: Endpoint,
    pub capacity_bytes_per_s: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Switch {
    pub id: u32,
    pub name: String,
}

/// Campus graph with one precomputed path per ordered node pair.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<NodeSpec>,
    switches: Vec<Switch>,
    links: Vec<Link>,
    paths: Vec<Vec<LinkId>>,
    access_link: Vec<LinkId>,
}

impl Topology {
    /// Builds and validates a tree topology; node ids must be `0..n` and link
    /// ids `0..m`, in order.
    pub fn new(nodes: Vec<NodeSpec>, switches: Vec<Switch>, links: Vec<Link>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Topology("need at least two nodes".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id.0 as usize != i {
                return Err(Error::Topology(format!("node ids must be dense; found {} at {i}", n.id)));
            }
            n.validate()?;
        }
        for (i, l) in links.iter().enumerate() {
            if l.id.0 as usize != i {
                return Err(Error::Topology(format!("link ids must be dense; found {} at {i}", l.id)));
            }
            if !(l.capacity_bytes_per_s > 0.0) {
                return Err(Error::Topology(format!("{}: capacity must be > 0", l.id)));
            }
        }
        let nn = nodes.len();
        let vertex = |e: &Endpoint| -> Result<usize> {
            match *e {
                Endpoint::Node(id) if (id.0 as usize) < nn => Ok(id.0 as usize),
                Endpoint::Node(id) => Err(Error::UnknownNode(id.to_string())),
                Endpoint::Switch(s) => switches
                    .iter()
                    .position(|sw| sw.id == s)
                    .map(|p| nn + p)
                    .ok_or_else(|| Error::Topology(format!("unknown switch {s}"))),
            }
        };
        let nv = nn + switches.len();
        let mut adj: Vec<Vec<(usize, LinkId)>> = vec![Vec::new(); nv];
        for l in &links {
            let (a, b) = (vertex(&l.a)?, vertex(&l.b)?);
            adj[a].push((b, l.id));
            adj[b].push((a, l.id));
        }
        if links.len() + 1 != nv {
            return Err(Error::Topology(format!(
                "expected a tree: {nv} vertices need {} links, found {}",
                nv - 1,
                links.len()
            )));
        }

        let mut access_link = Vec::with_capacity(nn);
        for (i, n) in nodes.iter().enumerate() {
            match adj[i].as_slice() {
                [(_, l)] if links[l.0 as usize].tier == Tier::Access => access_link.push(*l),
                _ => {
                    return Err(Error::Topology(format!(
                        "{} must have exactly one access-tier link",
                        n.id
                    )))
                }
            }
        }

        let mut paths = vec![Vec::new(); nn * nn];
        for s in 0..nn {
            // BFS parent pointers; the tree makes the path unique.
            let mut parent: Vec<Option<(usize, LinkId)>> = vec![None; nv];
            let mut seen = vec![false; nv];
            seen[s] = true;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &(v, l) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        parent[v] = Some((u, l));
                        q.push_back(v);
                    }
                }
            }
            if seen.iter().any(|&x| !x) {
                return Err(Error::Topology("graph is not connected".into()));
            }
            for d in 0..nn {
                if d == s {
                    continue;
                }
                let mut path = Vec::new();
                let mut v = d;
                while let Some((u, l)) = parent[v] {
                    path.push(l);
                    v = u;
                }
                path.reverse();
                paths[s * nn + d] = path;
            }
        }

        let topo = Self {
            nodes,
            switches,
            links,
            paths,
            access_link,
        };
        for s in 0..nn {
            for d in 0..nn {
                if s != d
                    && topo.nodes[s].building == topo.nodes[d].building
                    && topo.paths[s * nn + d]
                        .iter()
                        .any(|l| topo.links[l.0 as usize].tier == Tier::Core)
                {
                    return Err(Error::Topology(format!(
                        "same-building path n{s}->n{d} crosses a core link"
                    )));
                }
            }
        }
        Ok(topo)
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeSpec> {
        self.nodes
            .get(id.0 as usize)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    pub fn providers(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.is_provider())
    }

    /// The store node of a building, if one exists.
    pub fn store_of(&self, building: BuildingId) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|n| n.role == NodeRole::Store && n.building == building)
            .map(|n| n.id)
    }

    pub fn buildings(&self) -> Vec<BuildingId> {
        let mut b: Vec<_> = self.nodes.iter().map(|n| n.building).collect();
        b.sort();
        b.dedup();
        b
    }

    pub fn access_link(&self, n: NodeId) -> LinkId {
        self.access_link[n.0 as usize]
    }

    pub fn same_building(&self, a: NodeId, b: NodeId) -> bool {
        self.nodes[a.0 as usize].building == self.nodes[b.0 as usize].building
    }

    /// Ordered link list from `s` to `d`.
    pub fn path(&self, s: NodeId, d: NodeId) -> Result<&[LinkId]> {
        let n = self.nodes.len();
        if s.0 as usize >= n {
            return Err(Error::UnknownNode(s.to_string()));
        }
        if d.0 as usize >= n {
            return Err(Error::UnknownNode(d.to_string()));
        }
        if s == d {
            return Err(Error::NoPath(s.to_string(), d.to_string()));
        }
        Ok(&self.paths[s.0 as usize * n + d.0 as usize])
    }
}

/// Campus generator parameters. Defaults follow a four-building three-tier
/// campus with 1 Gbps access, 1 Gbps distribution and 10 Gbps core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampusParams {
    pub buildings: u32,
    pub nodes_per_building: u32,
    pub access_bytes_per_s: f64,
    /// Distribution capacities are drawn uniformly from this list.
    pub distribution_bytes_per_s: Vec<f64>,
    pub core_bytes_per_s: f64,
    /// Buildings sharing one distribution router.
    pub buildings_per_router: u32,
    /// Access capacity of each building's checkpoint store; zero disables stores.
    pub store_bytes_per_s: f64,
}

impl Default for CampusParams {
    fn default() -> Self {
        Self {
            buildings: 4,
            nodes_per_building: 5,
            access_bytes_per_s: GBPS,
            distribution_bytes_per_s: vec![GBPS],
            core_bytes_per_s: 10.0 * GBPS,
            buildings_per_router: 2,
            store_bytes_per_s: 5.0 * GBPS,
        }
    }
}

/// GPU classes cycled through when generating providers:
/// (vram, cuda capability, slots, write speed).
const GPU_CLASSES: [(f64, f64, u32, f64); 4] = [
    (24.0 * GB, 8.6, 1, 1100.0 * MB), // RTX 3090
    (24.0 * GB, 8.9, 1, 1100.0 * MB), // RTX 4090
    (80.0 * GB, 8.0, 4, 2000.0 * MB), // A100
    (48.0 * GB, 8.6, 2, 1500.0 * MB), // A6000
];

/// Generates a campus tree. Switch 0 is the core; routers and building
/// switches follow.
pub fn generate_campus(params: &CampusParams, rng: &mut Rng) -> Result<Topology> {
    if params.buildings == 0 || params.nodes_per_building == 0 || params.buildings_per_router == 0 {
        return Err(Error::Topology("campus dimensions must be positive".into()));
    }
    if params.distribution_bytes_per_s.is_empty() {
        return Err(Error::Topology("no distribution capacities".into()));
    }
    let routers = params.buildings.div_ceil(params.buildings_per_router);
    let mut switches = vec![Switch { id: 0, name: "core".into() }];
    for r in 0..routers {
        switches.push(Switch { id: 1 + r, name: format!("router{r}") });
    }
    for b in 0..params.buildings {
        switches.push(Switch { id: 1 + routers + b, name: format!("building{b}") });
    }
    let mut links = Vec::new();
    let push = |a: Endpoint, b: Endpoint, cap: f64, tier: Tier, links: &mut Vec<Link>| {
        let id = LinkId(links.len() as u32);
        links.push(Link { id, a, b, capacity_bytes_per_s: cap, tier });
    };
    for r in 0..routers {
        push(Endpoint::Switch(1 + r), Endpoint::Switch(0), params.core_bytes_per_s, Tier::Core, &mut links);
    }
    for b in 0..params.buildings {
        let cap = params.distribution_bytes_per_s
            [rng.random_range(0..params.distribution_bytes_per_s.len())];
        let router = 1 + b / params.buildings_per_router;
        push(Endpoint::Switch(1 + routers + b), Endpoint::Switch(router), cap, Tier::Distribution, &mut links);
    }
    let mut nodes = Vec::new();
    let mut k = 0usize;
    for b in 0..params.buildings {
        let sw = Endpoint::Switch(1 + routers + b);
        for _ in 0..params.nodes_per_building {
            let (vram, cuda, slots, write) = GPU_CLASSES[k % GPU_CLASSES.len()];
            k += 1;
            let id = NodeId(nodes.len() as u32);
            nodes.push(NodeSpec {
                id,
                building: BuildingId(b),
                role: NodeRole::Provider,
                vram_bytes: vram,
                cuda_capability: cuda,
                load: 0.0,
                write_speed_bytes_per_s: write,
                gpu_slots: slots,
                hazard_profile: id.0,
            });
            push(Endpoint::Node(id), sw, params.access_bytes_per_s, Tier::Access, &mut links);
        }
        if params.store_bytes_per_s > 0.0 {
            let id = NodeId(nodes.len() as u32);
            nodes.push(NodeSpec {
                id,
                building: BuildingId(b),
                role: NodeRole::Store,
                vram_bytes: 1.0,
                cuda_capability: 0.0,
                load: 0.0,
                write_speed_bytes_per_s: params.store_bytes_per_s,
                gpu_slots: 0,
                hazard_profile: id.0,
            });
            push(Endpoint::Node(id), sw, params.store_bytes_per_s, Tier::Access, &mut links);
        }
    }
    Topology::new(nodes, switches, links)
}
