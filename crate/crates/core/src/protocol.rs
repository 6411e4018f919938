//! Per-node restoration protocol.
//!
//! Each node runs the same header rules. With the on-optimum flag set the
//! node follows field 2 (optimum route); with it cleared it follows field 3
//! (bypass route). A node that knows the next optimum link is down computes
//! a bypass to the unreachable neighbor, clears the flag and forwards along
//! the bypass. The second-last node of a bypass sets the flag again so the
//! rejoin node continues on the optimum route.
//!
//! Fault knowledge comes from per-hop acknowledgements: a node forwarding a
//! header expects an ack from the successor within `t_s` and marks the link
//! down otherwise. The link stays suspected until it is explicitly repaired.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblerConfig, FieldIssue};
use crate::model::{BurstControlPacket, LinkId, NodeId, SimTime, Topology};
use crate::routing::{Path, RouteError, Router};

/// Bypass search callback: `(from, to, excluded_links)`.
pub type PathFinder<'a> = dyn FnMut(NodeId, NodeId, &BTreeSet<LinkId>) -> Result<Path, RouteError> + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Header processing time at each node.
    pub t_h: SimTime,
    /// Ack timeout window.
    pub t_s: SimTime,
    pub router: Router,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            t_h: SimTime(10),
            t_s: SimTime(50),
            router: Router::Exact,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        if self.t_h == SimTime::ZERO {
            issues.push(FieldIssue::new("t_h", "must be positive"));
        }
        if self.t_s == SimTime::ZERO {
            issues.push(FieldIssue::new("t_s", "must be positive"));
        }
        if let Router::Genetic(ga) = &self.router {
            for mut i in ga.validate() {
                i.path = format!("ga.{}", i.path);
                issues.push(i);
            }
        }
        issues
    }
}

/// Header lead over the payload at the source: `t_h + t_s` plus the
/// class offset of priority assembly.
pub fn compute_offset(cfg: &ProtocolConfig, class_index: usize, assembler: &AssemblerConfig) -> SimTime {
    cfg.t_h + cfg.t_s + assembler.class_offset(class_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    NoBypass,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeaderAction {
    Forward { successor: NodeId, header: BurstControlPacket },
    Terminate,
    Reroute { successor: NodeId, header: BurstControlPacket },
    Drop(DropReason),
}

impl HeaderAction {
    pub fn label(&self) -> &'static str {
        match self {
            HeaderAction::Forward { .. } => "forward",
            HeaderAction::Terminate => "terminate",
            HeaderAction::Reroute { .. } => "reroute",
            HeaderAction::Drop(_) => "drop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckTimeout {
    pub link: LinkId,
    /// False if the link was already suspected.
    pub newly_suspected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossOfLight {
    pub node: NodeId,
    pub link: LinkId,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeProtocolState {
    pub node: NodeId,
    pub pending_acks: BTreeMap<(u64, NodeId), SimTime>,
    pub known_down_links: BTreeSet<LinkId>,
}

impl NodeProtocolState {
    pub fn new(node: NodeId) -> Self {
        NodeProtocolState {
            node,
            pending_acks: BTreeMap::new(),
            known_down_links: BTreeSet::new(),
        }
    }

    /// Applies the header rules at this node.
    ///
    /// `topo` is the node's routing view; links in `known_down_links` are
    /// excluded on top of whatever is already Down in it.
    pub fn process_header(&self, header: &BurstControlPacket, topo: &Topology, router: &Router) -> HeaderAction {
        self.process_header_with(header, topo, &mut |from, to, excluded| {
            router.route(topo, from, to, excluded)
        })
    }

    /// As [`process_header`](Self::process_header), with bypass computation
    /// delegated to `find(from, to, excluded_links)`.
    pub fn process_header_with(&self, header: &BurstControlPacket, topo: &Topology, find: &mut PathFinder<'_>) -> HeaderAction {
        let me = self.node;
        let mut h = header.clone();
        if h.on_optimum_flag {
            let Some(pos) = h.optimum_route.iter().position(|&n| n == me) else {
                return HeaderAction::Drop(DropReason::Malformed);
            };
            if pos + 1 == h.optimum_route.len() {
                return HeaderAction::Terminate;
            }
            let next = h.optimum_route[pos + 1];
            match self.down_link_to(topo, next) {
                None => {
                    h.successor = next;
                    HeaderAction::Forward { successor: next, header: h }
                }
                Some(failed) => self.reroute(h, next, failed, find),
            }
        } else {
            let Some(pos) = h.bypass_route.iter().position(|&n| n == me) else {
                return HeaderAction::Drop(DropReason::Malformed);
            };
            if pos + 1 == h.bypass_route.len() {
                return HeaderAction::Drop(DropReason::Malformed);
            }
            let next = h.bypass_route[pos + 1];
            if let Some(failed) = self.down_link_to(topo, next) {
                // Failure on the detour itself: detour again towards the
                // same rejoin node.
                let rejoin = *h.bypass_route.last().expect("non-empty");
                return self.reroute(h, rejoin, failed, find);
            }
            if pos + 2 == h.bypass_route.len() {
                h.on_optimum_flag = true;
            }
            h.successor = next;
            HeaderAction::Forward { successor: next, header: h }
        }
    }

    fn down_link_to(&self, topo: &Topology, next: NodeId) -> Option<LinkId> {
        topo.link_between(self.node, next)
            .filter(|l| self.known_down_links.contains(l))
    }

    fn reroute(&self, mut h: BurstControlPacket, rejoin: NodeId, failed: LinkId, find: &mut PathFinder<'_>) -> HeaderAction {
        let mut excluded = self.known_down_links.clone();
        excluded.insert(failed);
        match find(self.node, rejoin, &excluded) {
            Ok(path) if path.nodes.len() >= 2 => {
                h.on_optimum_flag = path.nodes.len() == 2;
                h.successor = path.nodes[1];
                h.bypass_route = path.nodes;
                HeaderAction::Reroute {
                    successor: h.successor,
                    header: h,
                }
            }
            _ => HeaderAction::Drop(DropReason::NoBypass),
        }
    }

    /// Starts waiting for the successor's ack. Re-arming the same key
    /// replaces the deadline.
    pub fn arm_ack_timer(&mut self, burst_id: u64, successor: NodeId, now: SimTime, cfg: &ProtocolConfig) -> SimTime {
        let deadline = now + cfg.t_s;
        self.pending_acks.insert((burst_id, successor), deadline);
        deadline
    }

    /// Returns true if the ack matched a pending entry. Late acks for an
    /// entry that already timed out are ignored.
    pub fn on_ack(&mut self, burst_id: u64, successor: NodeId) -> bool {
        self.pending_acks.remove(&(burst_id, successor)).is_some()
    }

    /// Handles an ack deadline. Returns `None` if the ack already arrived
    /// or the deadline has not been reached.
    pub fn on_ack_timeout(
        &mut self,
        burst_id: u64,
        successor: NodeId,
        topo: &Topology,
        now: SimTime,
    ) -> Option<AckTimeout> {
        let key = (burst_id, successor);
        match self.pending_acks.get(&key) {
            Some(&deadline) if deadline <= now => {
                self.pending_acks.remove(&key);
            }
            _ => return None,
        }
        let link = topo.link_between(self.node, successor)?;
        let newly_suspected = self.known_down_links.insert(link);
        Some(AckTimeout { link, newly_suspected })
    }

    pub fn on_link_repair(&mut self, link: LinkId) -> bool {
        self.known_down_links.remove(&link)
    }
}

/// Receiver-side fiber monitor. Records an Up-to-Down transition of a link
/// adjacent to `node`; nothing else happens.
pub fn monitor_loss_of_light(
    topo: &Topology,
    node: NodeId,
    link: LinkId,
    was_up: bool,
    is_up: bool,
    now: SimTime,
) -> Option<LossOfLight> {
    let l = topo.link(link);
    let adjacent = l.a == node || l.b == node;
    (adjacent && was_up && !is_up).then_some(LossOfLight { node, link, at: now })
}
