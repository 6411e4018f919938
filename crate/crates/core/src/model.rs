//! Domain types shared across the simulator: simulated time, packets,
//! bursts, burst headers and the network topology.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated time in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Index of a node inside its [`Topology`]. Ordering follows declaration
/// order, which is the tie-break order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of a link inside its [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub length_bytes: u64,
    pub class_index: usize,
    pub source_node: NodeId,
    pub dest_node: NodeId,
    pub created_at: SimTime,
}

/// An assembled burst (BDP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstDataPacket {
    pub burst_id: u64,
    pub packets: Vec<Packet>,
    pub total_bytes: u64,
    pub class_index: usize,
    pub assembled_at: SimTime,
    pub source_node: NodeId,
    pub dest_node: NodeId,
}

impl BurstDataPacket {
    /// Builds a burst from a non-empty, homogeneous packet list.
    ///
    /// Panics if `packets` is empty; assemblers never emit empty bursts.
    pub fn from_packets(burst_id: u64, packets: Vec<Packet>, assembled_at: SimTime) -> Self {
        let first = packets.first().expect("burst must contain at least one packet");
        let (class_index, source_node, dest_node) = (first.class_index, first.source_node, first.dest_node);
        debug_assert!(packets
            .iter()
            .all(|p| p.class_index == class_index && p.dest_node == dest_node));
        let total_bytes = packets.iter().map(|p| p.length_bytes).sum();
        BurstDataPacket {
            burst_id,
            packets,
            total_bytes,
            class_index,
            assembled_at,
            source_node,
            dest_node,
        }
    }
}

/// The burst header (BCP). The first four fields are the on-wire header;
/// the rest is bookkeeping carried alongside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurstControlPacket {
    /// Field 1: address of the immediate successor.
    pub successor: NodeId,
    /// Field 2: source-computed route to the destination.
    pub optimum_route: Vec<NodeId>,
    /// Field 3: detour around a failed link, empty until one is needed.
    pub bypass_route: Vec<NodeId>,
    /// Field 4: true while the holder sits on the optimum route.
    pub on_optimum_flag: bool,
    pub burst_id: u64,
    pub class_index: usize,
    pub offset: SimTime,
}

impl BurstControlPacket {
    pub fn new(burst_id: u64, class_index: usize, optimum_route: Vec<NodeId>, offset: SimTime) -> Self {
        let successor = optimum_route[0];
        BurstControlPacket {
            successor,
            optimum_route,
            bypass_route: Vec::new(),
            on_optimum_flag: true,
            burst_id,
            class_index,
            offset,
        }
    }

    pub fn destination(&self) -> NodeId {
        *self.optimum_route.last().expect("optimum route is never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: f64,
    pub delay: SimTime,
    pub state: LinkState,
}

impl Link {
    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if n == self.a {
            Some(self.b)
        } else if n == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn is_up(&self) -> bool {
        self.state == LinkState::Up
    }
}

/// A link as supplied to [`Topology::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub weight: f64,
    pub delay: SimTime,
}

impl LinkSpec {
    pub fn new(a: impl Into<String>, b: impl Into<String>, weight: f64) -> Self {
        LinkSpec {
            a: a.into(),
            b: b.into(),
            weight,
            delay: DEFAULT_LINK_DELAY,
        }
    }

    pub fn with_delay(mut self, delay: SimTime) -> Self {
        self.delay = delay;
        self
    }
}

pub const DEFAULT_LINK_DELAY: SimTime = SimTime(10);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("link {a}-{b} references unknown node {node:?}")]
    UnknownEndpoint { a: String, b: String, node: String },
    #[error("self-loop on node {0:?}")]
    SelfLoop(String),
    #[error("duplicate link {0}-{1}")]
    DuplicateLink(String, String),
    #[error("link {a}-{b} has non-positive weight {weight}")]
    NonPositiveWeight { a: String, b: String, weight: f64 },
    #[error("no such link {0}-{1}")]
    UnknownLink(String, String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

/// Weighted undirected graph with per-link up/down state.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    names: Vec<String>,
    index: BTreeMap<String, NodeId>,
    links: Vec<Link>,
    /// Per node: (neighbor, link) sorted by neighbor id.
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
}

impl Topology {
    /// Validates node and link lists and returns a topology with every link Up.
    pub fn build<S: AsRef<str>>(nodes: &[S], links: &[LinkSpec]) -> Result<Topology, TopologyError> {
        let mut names = Vec::with_capacity(nodes.len());
        let mut index = BTreeMap::new();
        for name in nodes {
            let name = name.as_ref().to_string();
            let id = NodeId(names.len() as u32);
            if index.insert(name.clone(), id).is_some() {
                return Err(TopologyError::DuplicateNode(name));
            }
            names.push(name);
        }

        let mut topo = Topology {
            adjacency: vec![Vec::new(); names.len()],
            names,
            index,
            links: Vec::with_capacity(links.len()),
        };

        for spec in links {
            let lookup = |n: &str| {
                topo.index.get(n).copied().ok_or_else(|| TopologyError::UnknownEndpoint {
                    a: spec.a.clone(),
                    b: spec.b.clone(),
                    node: n.to_string(),
                })
            };
            let a = lookup(&spec.a)?;
            let b = lookup(&spec.b)?;
            if a == b {
                return Err(TopologyError::SelfLoop(spec.a.clone()));
            }
            if !spec.weight.is_finite() || spec.weight <= 0.0 {
                return Err(TopologyError::NonPositiveWeight {
                    a: spec.a.clone(),
                    b: spec.b.clone(),
                    weight: spec.weight,
                });
            }
            if topo.link_between(a, b).is_some() {
                return Err(TopologyError::DuplicateLink(spec.a.clone(), spec.b.clone()));
            }
            let id = LinkId(topo.links.len() as u32);
            topo.links.push(Link {
                a,
                b,
                weight: spec.weight,
                delay: spec.delay,
                state: LinkState::Up,
            });
            topo.adjacency[a.index()].push((b, id));
            topo.adjacency[b.index()].push((a, id));
        }
        for adj in &mut topo.adjacency {
            adj.sort();
        }
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn require_node(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.node_id(name).ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &Link)> + '_ {
        self.links.iter().enumerate().map(|(i, l)| (LinkId(i as u32), l))
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency
            .get(a.index())?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, l)| l)
    }

    /// Neighbors of `n` in ascending node order, regardless of link state.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[n.index()]
    }

    pub fn link_label(&self, id: LinkId) -> String {
        let l = self.link(id);
        format!("{}-{}", self.name(l.a), self.name(l.b))
    }

    pub fn path_label(&self, path: &[NodeId]) -> String {
        let names: Vec<&str> = path.iter().map(|&n| self.name(n)).collect();
        format!("[{}]", names.join(","))
    }

    /// Sets the state of link `a`-`b` in place.
    pub fn set_link_state(&mut self, a: NodeId, b: NodeId, state: LinkState) -> Result<LinkId, TopologyError> {
        let id = self.link_between(a, b).ok_or_else(|| {
            TopologyError::UnknownLink(self.name(a).to_string(), self.name(b).to_string())
        })?;
        self.links[id.index()].state = state;
        Ok(id)
    }

    /// Returns a copy with the state of link `a`-`b` replaced.
    pub fn with_link_state(&self, a: NodeId, b: NodeId, state: LinkState) -> Result<Topology, TopologyError> {
        let mut t = self.clone();
        t.set_link_state(a, b, state)?;
        Ok(t)
    }

    pub fn set_link_state_by_id(&mut self, id: LinkId, state: LinkState) {
        self.links[id.index()].state = state;
    }

    /// Copy with every link Up.
    pub fn all_up(&self) -> Topology {
        let mut t = self.clone();
        for l in &mut t.links {
            l.state = LinkState::Up;
        }
        t
    }
}

pub mod fixtures {
    //! The ten-node reference network used in examples and tests.

    use super::{LinkSpec, Topology};

    pub const FIGURE1_NODES: [&str; 10] = ["N1", "N2", "N3", "N4", "N5", "N6", "N7", "N8", "N9", "N10"];

    pub const FIGURE1_LINKS: [(&str, &str); 12] = [
        ("N1", "N2"),
        ("N2", "N3"),
        ("N3", "N4"),
        ("N4", "N5"),
        ("N5", "N10"),
        ("N1", "N6"),
        ("N6", "N7"),
        ("N7", "N5"),
        ("N1", "N8"),
        ("N8", "N9"),
        ("N9", "N10"),
        ("N6", "N10"),
    ];

    pub fn figure1_link_specs() -> Vec<LinkSpec> {
        FIGURE1_LINKS.iter().map(|&(a, b)| LinkSpec::new(a, b, 1.0)).collect()
    }

    /// Unit-weight ten-node network.
    pub fn figure1() -> Topology {
        Topology::build(&FIGURE1_NODES, &figure1_link_specs()).expect("fixture is valid")
    }
}
