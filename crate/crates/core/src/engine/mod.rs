//! Deterministic discrete-event loop.
//!
//! Events run in (time, insertion sequence) order. Packets enter at edge
//! nodes, are assembled into bursts, and each burst travels as a header
//! followed by its payload. Headers pay `t_h` per node; payloads are cut
//! through along whatever the header configured at each hop. Links carry
//! headers, payloads and acks with the same propagation delay and lose
//! anything in flight when they fail.
//!
//! In protection mode there are no headers: each burst is sent at once on
//! a working path and on a link-disjoint backup, and the destination keeps
//! the first copy.

pub mod metrics;
pub mod traffic;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblerConfig, Algorithm, BurstIds, EdgeAssembler, FieldIssue};
use crate::model::{BurstControlPacket, BurstDataPacket, LinkId, LinkState, NodeId, Packet, SimTime, Topology};
use crate::protocol::{compute_offset, monitor_loss_of_light, DropReason, HeaderAction, NodeProtocolState, ProtocolConfig};
use crate::routing::{link_disjoint_backup, Path, RouteError};

pub use metrics::{LossReason, MetricsReport};
use metrics::{Collector, FaultRecord, LossOfLightRecord};
use traffic::{StreamGenerator, TrafficConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Restoration,
    Protection,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Restoration => "restoration",
            Mode::Protection => "protection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub link: LinkId,
    pub fail_at: SimTime,
    pub repair_at: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultEvent {
    Fail(LinkId),
    Repair(LinkId),
}

/// Turns a fault schedule into timed link events. Windows on the same
/// link must not overlap and every repair must follow its failure.
pub fn inject_fault(topo: &Topology, schedule: &[FaultSpec]) -> Result<Vec<(SimTime, FaultEvent)>, Vec<FieldIssue>> {
    let mut issues = Vec::new();
    let mut by_link: BTreeMap<LinkId, Vec<(SimTime, Option<SimTime>, usize)>> = BTreeMap::new();
    for (i, f) in schedule.iter().enumerate() {
        if f.link.index() >= topo.link_count() {
            issues.push(FieldIssue::new(format!("faults[{i}].link"), "no such link"));
            continue;
        }
        if let Some(r) = f.repair_at {
            if r <= f.fail_at {
                issues.push(FieldIssue::new(format!("faults[{i}].repair_at"), "must be after fail_at"));
                continue;
            }
        }
        by_link.entry(f.link).or_default().push((f.fail_at, f.repair_at, i));
    }
    for windows in by_link.values_mut() {
        windows.sort();
        for w in windows.windows(2) {
            let (_, end, _) = w[0];
            let (start, _, j) = w[1];
            if end.is_none_or(|e| e > start) {
                issues.push(FieldIssue::new(format!("faults[{j}]"), "overlaps an earlier window on the same link"));
            }
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }
    let mut events: Vec<(SimTime, FaultEvent)> = schedule
        .iter()
        .flat_map(|f| {
            std::iter::once((f.fail_at, FaultEvent::Fail(f.link)))
                .chain(f.repair_at.map(|r| (r, FaultEvent::Repair(f.link))))
        })
        .collect();
    events.sort_by_key(|&(t, e)| {
        (
            t,
            match e {
                FaultEvent::Repair(l) => (0, l),
                FaultEvent::Fail(l) => (1, l),
            },
        )
    });
    Ok(events)
}

/// A fully resolved simulation input.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub traffic: TrafficConfig,
    pub assembler: AssemblerConfig,
    /// Per-edge-node replacements for `assembler`.
    pub assembler_overrides: BTreeMap<NodeId, AssemblerConfig>,
    pub protocol: ProtocolConfig,
    pub mode: Mode,
    pub faults: Vec<FaultSpec>,
    pub horizon: SimTime,
    /// No packets are generated at or after this time.
    pub traffic_until: SimTime,
    pub histogram_bin_bytes: u64,
}

impl Scenario {
    pub const DEFAULT_HORIZON: SimTime = SimTime(10_000);
    pub const DEFAULT_HISTOGRAM_BIN: u64 = 1_000;

    /// No traffic, default assembler and protocol, restoration mode.
    pub fn new(topology: Topology) -> Scenario {
        Scenario {
            topology,
            traffic: TrafficConfig::default(),
            assembler: AssemblerConfig::default(),
            assembler_overrides: BTreeMap::new(),
            protocol: ProtocolConfig::default(),
            mode: Mode::Restoration,
            faults: Vec::new(),
            horizon: Self::DEFAULT_HORIZON,
            traffic_until: Self::DEFAULT_HORIZON,
            histogram_bin_bytes: Self::DEFAULT_HISTOGRAM_BIN,
        }
    }

    pub fn assembler_for(&self, node: NodeId) -> &AssemblerConfig {
        self.assembler_overrides.get(&node).unwrap_or(&self.assembler)
    }

    pub fn validate(&self) -> Vec<FieldIssue> {
        let topo = &self.topology;
        let mut issues = Vec::new();
        let prefixed = |prefix: &str, v: Vec<FieldIssue>| {
            v.into_iter()
                .map(|mut i| {
                    i.path = format!("{prefix}.{}", i.path);
                    i
                })
                .collect::<Vec<_>>()
        };
        if self.horizon == SimTime::ZERO {
            issues.push(FieldIssue::new("sim.horizon", "must be positive"));
        }
        if self.traffic_until > self.horizon {
            issues.push(FieldIssue::new("sim.traffic_until", "must not exceed the horizon"));
        }
        if self.histogram_bin_bytes == 0 {
            issues.push(FieldIssue::new("sim.histogram_bin", "must be positive"));
        }
        issues.extend(prefixed("assembler", self.assembler.validate()));
        for (node, cfg) in &self.assembler_overrides {
            let name = topo.names().get(node.index()).cloned().unwrap_or_else(|| format!("#{}", node.0));
            issues.extend(prefixed(&format!("assemblers.{name}"), cfg.validate()));
        }
        issues.extend(prefixed("protocol", self.protocol.validate()));
        if let Some((id, l)) = topo.links().max_by_key(|(_, l)| l.delay) {
            if self.protocol.t_s <= l.delay + l.delay {
                issues.push(FieldIssue::new(
                    "protocol.t_s",
                    format!(
                        "must exceed the ack round trip of every link ({} on {})",
                        l.delay + l.delay,
                        topo.link_label(id)
                    ),
                ));
            }
        }
        issues.extend(self.traffic.validate());
        let flows = self.traffic.streams.iter().enumerate().map(|(i, s)| (format!("traffic[{i}]"), s.source, s.dest, s.class_index));
        let scripted = self.traffic.scripted.iter().enumerate().map(|(i, p)| (format!("packets[{i}]"), p.source, p.dest, p.class_index));
        for (path, source, dest, class) in flows.chain(scripted) {
            self.validate_flow(&path, source, dest, class, &mut issues);
        }
        if let Err(fault_issues) = inject_fault(topo, &self.faults) {
            issues.extend(fault_issues);
        }
        issues
    }
}

impl Scenario {
    fn validate_flow(&self, path: &str, source: NodeId, dest: NodeId, class: usize, issues: &mut Vec<FieldIssue>) {
        let topo = &self.topology;
        let mut known = true;
        for (field, n) in [("source", source), ("dest", dest)] {
            if n.index() >= topo.node_count() {
                issues.push(FieldIssue::new(format!("{path}.{field}"), "unknown node"));
                known = false;
            }
        }
        let asm = self.assembler_for(source);
        if asm.algorithm == Algorithm::PriorityAas {
            if class >= asm.priority.n_classes {
                issues.push(FieldIssue::new(
                    format!("{path}.class"),
                    format!("must be below n_classes = {}", asm.priority.n_classes),
                ));
            }
            if dest.index() >= asm.priority.m_destinations {
                issues.push(FieldIssue::new(
                    format!("{path}.dest"),
                    format!("index exceeds m_destinations = {}", asm.priority.m_destinations),
                ));
            }
        }
        if self.mode == Mode::Protection && known && source != dest && protection_paths(topo, source, dest).is_err() {
            issues.push(FieldIssue::new(
                path,
                format!("no link-disjoint backup path from {} to {}", topo.name(source), topo.name(dest)),
            ));
        }
    }
}

/// Working path and its link-disjoint backup, both exact shortest paths.
pub fn protection_paths(topo: &Topology, src: NodeId, dst: NodeId) -> Result<(Path, Path), RouteError> {
    let working = crate::routing::exact_shortest_path(&topo.all_up(), src, dst)?;
    let backup = link_disjoint_backup(&topo.all_up(), &working)?;
    Ok((working, backup))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldIssue>),
    #[error(transparent)]
    Assembly(#[from] crate::assembly::AssemblyError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_us: u64,
    pub kind: String,
    pub node: String,
    pub burst_id: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BurstStatus {
    Delivered { at: SimTime },
    Lost { at: SimTime, reason: LossReason },
    InFlight,
}

/// One header decision at one hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderHop {
    pub node: NodeId,
    pub hop: usize,
    pub at: SimTime,
    pub action: String,
    pub successor: Option<NodeId>,
    pub on_optimum_flag: bool,
    pub bypass_route: Vec<NodeId>,
}

/// One header or payload transmission onto a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub link: LinkId,
    pub from: NodeId,
    pub to: NodeId,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstOutcome {
    pub burst_id: u64,
    pub source: NodeId,
    pub dest: NodeId,
    pub class_index: usize,
    pub packets: usize,
    pub bytes: u64,
    pub assembled_at: SimTime,
    pub status: BurstStatus,
    pub primary_route: Vec<NodeId>,
    pub header_hops: Vec<HeaderHop>,
    pub header_transmissions: Vec<Transmission>,
    pub payload_transmissions: Vec<Transmission>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Vec<TraceRecord>,
    pub bursts: Vec<BurstOutcome>,
}

pub fn run(scenario: &Scenario) -> Result<MetricsReport, EngineError> {
    Ok(run_with(scenario, RunOptions::default())?.report)
}

/// Same scenario with every burst duplicated over a disjoint backup.
pub fn run_protection_baseline(scenario: &Scenario) -> Result<MetricsReport, EngineError> {
    let sc = Scenario {
        mode: Mode::Protection,
        ..scenario.clone()
    };
    run(&sc)
}

pub fn run_with(scenario: &Scenario, opts: RunOptions) -> Result<RunOutput, EngineError> {
    let issues = scenario.validate();
    if !issues.is_empty() {
        return Err(EngineError::Invalid(issues));
    }
    let mut sim = Sim::new(scenario, opts);
    sim.run()?;
    Ok(sim.finish())
}

#[derive(Debug, Clone)]
enum EventKind {
    PacketArrival {
        stream: usize,
    },
    ScriptedArrival {
        index: usize,
    },
    AssemblyTimer {
        node: NodeId,
    },
    HeaderDone {
        node: NodeId,
        burst: u64,
        hop: usize,
        gen: u32,
        header: BurstControlPacket,
    },
    BcpArrival {
        node: NodeId,
        from: NodeId,
        burst: u64,
        hop: usize,
        gen: u32,
        header: BurstControlPacket,
        link: LinkId,
        epoch: u64,
    },
    /// Payload at `node`: departure from the source when `via` is `None`.
    Payload {
        node: NodeId,
        burst: u64,
        hop: usize,
        copy: usize,
        via: Option<(LinkId, u64)>,
    },
    AckArrival {
        node: NodeId,
        burst: u64,
        successor: NodeId,
        link: LinkId,
        epoch: u64,
    },
    AckTimeout {
        node: NodeId,
        burst: u64,
        successor: NodeId,
        hop: usize,
    },
    LinkFail {
        link: LinkId,
    },
    LinkRepair {
        link: LinkId,
    },
    SimEnd,
}

#[derive(Debug)]
struct Event {
    at: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decision {
    Forward(NodeId),
    Terminate,
    Dropped(LossReason),
}

#[derive(Debug, Clone)]
struct HopEntry {
    node: NodeId,
    ready_at: SimTime,
    decision: Decision,
    header_in: BurstControlPacket,
    payload_passed: bool,
}

#[derive(Debug, Clone)]
struct BurstState {
    bdp: BurstDataPacket,
    status: BurstStatus,
    primary_route: Vec<NodeId>,
    primary_links: Vec<LinkId>,
    hops: Vec<HopEntry>,
    header_gen: u32,
    header_lost: bool,
    /// Hop and completion time of the header currently being processed.
    header_due: Option<(usize, SimTime)>,
    copies_lost: usize,
    header_hops: Vec<HeaderHop>,
    header_tx: Vec<Transmission>,
    payload_tx: Vec<Transmission>,
}

#[derive(Debug, Clone)]
struct Edge {
    assembler: EdgeAssembler,
    timers: BTreeSet<SimTime>,
}

struct Sim<'a> {
    sc: &'a Scenario,
    opts: RunOptions,
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Event>,
    physical: Topology,
    view: Topology,
    link_epoch: Vec<u64>,
    nodes: Vec<NodeProtocolState>,
    edges: BTreeMap<NodeId, Edge>,
    streams: Vec<StreamGenerator>,
    pending_arrival: Vec<Option<(SimTime, u64)>>,
    burst_ids: BurstIds,
    next_packet_id: u64,
    bursts: BTreeMap<u64, BurstState>,
    route_cache: BTreeMap<(NodeId, NodeId, Vec<LinkId>), Result<Path, RouteError>>,
    protection: BTreeMap<(NodeId, NodeId), [Path; 2]>,
    faults: Vec<(FaultSpec, FaultRecord)>,
    metrics: Collector,
    trace: Vec<TraceRecord>,
    max_hops: usize,
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, opts: RunOptions) -> Self {
        let topo = &sc.topology;
        let streams: Vec<StreamGenerator> = sc
            .traffic
            .streams
            .iter()
            .enumerate()
            .map(|(i, s)| StreamGenerator::new(s, sc.traffic.seed, i))
            .collect();
        let mut edges = BTreeMap::new();
        let sources = sc.traffic.streams.iter().map(|s| s.source);
        for src in sources.chain(sc.traffic.scripted.iter().map(|p| p.source)) {
            edges.entry(src).or_insert_with(|| Edge {
                assembler: EdgeAssembler::new(sc.assembler_for(src).clone()),
                timers: BTreeSet::new(),
            });
        }
        let faults = sc
            .faults
            .iter()
            .map(|f| {
                (
                    f.clone(),
                    FaultRecord {
                        link: topo.link_label(f.link),
                        fail_at_us: f.fail_at.0,
                        repair_at_us: f.repair_at.map(|t| t.0),
                        detected_at_us: None,
                        first_recovered_delivery_us: None,
                        recovery_time_us: None,
                    },
                )
            })
            .collect();
        Sim {
            sc,
            opts,
            now: SimTime::ZERO,
            seq: 0,
            queue: BinaryHeap::new(),
            physical: topo.all_up(),
            view: topo.all_up(),
            link_epoch: vec![0; topo.link_count()],
            nodes: topo.nodes().map(NodeProtocolState::new).collect(),
            edges,
            pending_arrival: vec![None; streams.len()],
            streams,
            burst_ids: BurstIds::default(),
            next_packet_id: 0,
            bursts: BTreeMap::new(),
            route_cache: BTreeMap::new(),
            protection: BTreeMap::new(),
            faults,
            metrics: Collector::new(topo.link_count()),
            trace: Vec::new(),
            max_hops: 4 * topo.node_count().max(1),
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        debug_assert!(at >= self.now);
        self.queue.push(Event {
            at,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn record(&mut self, kind: &str, node: Option<NodeId>, burst: Option<u64>, detail: impl FnOnce(&Topology) -> String) {
        if self.opts.trace {
            let sc = self.sc;
            self.trace.push(TraceRecord {
                time_us: self.now.0,
                kind: kind.to_string(),
                node: node.map(|n| sc.topology.name(n).to_string()).unwrap_or_default(),
                burst_id: burst,
                detail: detail(&sc.topology),
            });
        }
    }

    fn run(&mut self) -> Result<(), EngineError> {
        self.schedule(self.sc.horizon, EventKind::SimEnd);
        let fault_events = inject_fault(&self.sc.topology, &self.sc.faults).map_err(EngineError::Invalid)?;
        for (at, ev) in fault_events {
            let kind = match ev {
                FaultEvent::Fail(link) => EventKind::LinkFail { link },
                FaultEvent::Repair(link) => EventKind::LinkRepair { link },
            };
            self.schedule(at, kind);
        }
        for i in 0..self.streams.len() {
            self.pull_arrival(i);
        }
        for (index, p) in self.sc.traffic.scripted.iter().enumerate() {
            if p.at < self.sc.traffic_until {
                self.schedule(p.at, EventKind::ScriptedArrival { index });
            }
        }

        while let Some(ev) = self.queue.pop() {
            self.now = ev.at;
            if let EventKind::SimEnd = ev.kind {
                self.record("sim_end", None, None, |_| String::new());
                break;
            }
            self.dispatch(ev.kind)?;
        }
        Ok(())
    }

    fn pull_arrival(&mut self, stream: usize) {
        let (at, len) = self.streams[stream].next().expect("streams are endless");
        if at < self.sc.traffic_until {
            self.pending_arrival[stream] = Some((at, len));
            self.schedule(at, EventKind::PacketArrival { stream });
        } else {
            self.pending_arrival[stream] = None;
        }
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), EngineError> {
        match kind {
            EventKind::PacketArrival { stream } => {
                let (at, length) = self.pending_arrival[stream].take().expect("pending arrival");
                debug_assert_eq!(at, self.now);
                let s = &self.sc.traffic.streams[stream];
                self.on_packet(s.source, s.dest, s.class_index, length)?;
                self.pull_arrival(stream);
            }
            EventKind::ScriptedArrival { index } => {
                let p = &self.sc.traffic.scripted[index];
                self.on_packet(p.source, p.dest, p.class_index, p.length)?;
            }
            EventKind::AssemblyTimer { node } => {
                let now = self.now;
                let edge = self.edges.get_mut(&node).expect("timer for an edge node");
                edge.timers.remove(&now);
                let bursts = edge.assembler.on_timer(now, &mut self.burst_ids);
                self.record("assembly_timer", Some(node), None, |_| format!("emitted={}", bursts.len()));
                self.launch(bursts);
                self.arm_assembly_timer(node);
            }
            EventKind::HeaderDone {
                node,
                burst,
                hop,
                gen,
                header,
            } => self.on_header_done(node, burst, hop, gen, header),
            EventKind::BcpArrival {
                node,
                from,
                burst,
                hop,
                gen,
                header,
                link,
                epoch,
            } => self.on_bcp_arrival(node, from, burst, hop, gen, header, link, epoch),
            EventKind::Payload {
                node,
                burst,
                hop,
                copy,
                via,
            } => self.on_payload(node, burst, hop, copy, via),
            EventKind::AckArrival {
                node,
                burst,
                successor,
                link,
                epoch,
            } => {
                let delivered = self.link_intact(link, epoch);
                let matched = delivered && self.nodes[node.index()].on_ack(burst, successor);
                self.record("ack_arrival", Some(node), Some(burst), |t| {
                    format!("from={} delivered={delivered} matched={matched}", t.name(successor))
                });
            }
            EventKind::AckTimeout {
                node,
                burst,
                successor,
                hop,
            } => self.on_ack_timeout(node, burst, successor, hop),
            EventKind::LinkFail { link } => self.on_link_fail(link),
            EventKind::LinkRepair { link } => {
                self.physical.set_link_state_by_id(link, LinkState::Up);
                for n in &mut self.nodes {
                    n.on_link_repair(link);
                }
                self.record("link_repair", None, None, |t| t.link_label(link));
            }
            EventKind::SimEnd => unreachable!("handled by the loop"),
        }
        Ok(())
    }

    fn on_packet(&mut self, node: NodeId, dest: NodeId, class_index: usize, length: u64) -> Result<(), EngineError> {
        let packet = Packet {
            id: self.next_packet_id,
            length_bytes: length,
            class_index,
            source_node: node,
            dest_node: dest,
            created_at: self.now,
        };
        self.next_packet_id += 1;
        self.metrics.packet_generated(class_index);
        self.record("packet_arrival", Some(node), None, |_| {
            format!("packet={} len={length} class={class_index}", packet.id)
        });
        let edge = self.edges.get_mut(&node).expect("packet source is an edge node");
        let bursts = edge.assembler.on_packet(packet, self.now, &mut self.burst_ids)?;
        self.launch(bursts);
        self.arm_assembly_timer(node);
        Ok(())
    }

    fn arm_assembly_timer(&mut self, node: NodeId) {
        let edge = self.edges.get_mut(&node).expect("edge node");
        if let Some(d) = edge.assembler.next_deadline() {
            if edge.timers.insert(d) {
                self.schedule(d, EventKind::AssemblyTimer { node });
            }
        }
    }

    fn optimum_route(&mut self, src: NodeId, dst: NodeId) -> Result<Path, RouteError> {
        let excluded: Vec<LinkId> = self.nodes[src.index()].known_down_links.iter().copied().collect();
        let key = (src, dst, excluded);
        if let Some(r) = self.route_cache.get(&key) {
            return r.clone();
        }
        let ex: BTreeSet<LinkId> = key.2.iter().copied().collect();
        let r = self.sc.protocol.router.route(&self.view, src, dst, &ex);
        self.route_cache.insert(key, r.clone());
        r
    }

    fn launch(&mut self, bdps: Vec<BurstDataPacket>) {
        for bdp in bdps {
            self.metrics.burst_assembled(&bdp);
            let (id, src, dst) = (bdp.burst_id, bdp.source_node, bdp.dest_node);
            self.record("burst_assembled", Some(src), Some(id), |_| {
                format!("packets={} bytes={} class={}", bdp.packets.len(), bdp.total_bytes, bdp.class_index)
            });
            let mut state = BurstState {
                bdp,
                status: BurstStatus::InFlight,
                primary_route: Vec::new(),
                primary_links: Vec::new(),
                hops: Vec::new(),
                header_gen: 0,
                header_lost: false,
                header_due: None,
                copies_lost: 0,
                header_hops: Vec::new(),
                header_tx: Vec::new(),
                payload_tx: Vec::new(),
            };
            match self.sc.mode {
                Mode::Restoration => match self.optimum_route(src, dst) {
                    Err(_) => {
                        self.bursts.insert(id, state);
                        self.lose(id, LossReason::NoRoute);
                    }
                    Ok(route) => {
                        let class = state.bdp.class_index;
                        let offset = compute_offset(&self.sc.protocol, class, self.sc.assembler_for(src));
                        state.primary_links = route.links(&self.view).expect("route over view");
                        state.primary_route = route.nodes.clone();
                        self.bursts.insert(id, state);
                        let header = BurstControlPacket::new(id, class, route.nodes, offset);
                        self.on_header_done(src, id, 0, 0, header);
                        self.schedule(
                            self.now + offset,
                            EventKind::Payload {
                                node: src,
                                burst: id,
                                hop: 0,
                                copy: 0,
                                via: None,
                            },
                        );
                    }
                },
                Mode::Protection => {
                    let topo = &self.sc.topology;
                    let paths = self
                        .protection
                        .entry((src, dst))
                        .or_insert_with(|| {
                            let (w, b) = protection_paths(topo, src, dst).expect("validated");
                            [w, b]
                        })
                        .clone();
                    state.primary_links = paths[0].links(&self.view).expect("path over view");
                    state.primary_route = paths[0].nodes.clone();
                    self.bursts.insert(id, state);
                    for copy in 0..2 {
                        self.schedule(
                            self.now,
                            EventKind::Payload {
                                node: src,
                                burst: id,
                                hop: 0,
                                copy,
                                via: None,
                            },
                        );
                    }
                }
            }
        }
    }

    fn link_intact(&self, link: LinkId, epoch: u64) -> bool {
        self.link_epoch[link.index()] == epoch && self.physical.link(link).is_up()
    }

    fn on_header_done(&mut self, node: NodeId, burst: u64, hop: usize, gen: u32, header: BurstControlPacket) {
        let Some(b) = self.bursts.get(&burst) else {
            return;
        };
        if b.header_gen != gen || b.hops.get(hop).is_some_and(|e| e.payload_passed) {
            return;
        }
        let action = if hop > self.max_hops {
            HeaderAction::Drop(DropReason::Malformed)
        } else {
            let view = &self.view;
            let router = &self.sc.protocol.router;
            let cache = &mut self.route_cache;
            self.nodes[node.index()].process_header_with(&header, view, &mut |from, to, excluded| {
                let key = (from, to, excluded.iter().copied().collect());
                cache
                    .entry(key)
                    .or_insert_with(|| router.route(view, from, to, excluded))
                    .clone()
            })
        };

        let (decision, out) = match &action {
            HeaderAction::Forward { successor, header } | HeaderAction::Reroute { successor, header } => {
                (Decision::Forward(*successor), Some((*successor, header.clone())))
            }
            HeaderAction::Terminate => (Decision::Terminate, None),
            HeaderAction::Drop(r) => (
                Decision::Dropped(match r {
                    DropReason::NoBypass => LossReason::NoBypass,
                    DropReason::Malformed => LossReason::Malformed,
                }),
                None,
            ),
        };
        match &action {
            HeaderAction::Reroute { .. } => self.metrics.protocol.reroutes += 1,
            HeaderAction::Drop(_) => self.metrics.protocol.header_drops += 1,
            _ => {}
        }

        let hop_record = {
            let h = out.as_ref().map(|(_, h)| h).unwrap_or(&header);
            HeaderHop {
                node,
                hop,
                at: self.now,
                action: action.label().to_string(),
                successor: out.as_ref().map(|(s, _)| *s),
                on_optimum_flag: h.on_optimum_flag,
                bypass_route: h.bypass_route.clone(),
            }
        };
        self.record("bcp_processed", Some(node), Some(burst), |t| {
            let mut d = format!("hop={hop} action={}", hop_record.action);
            if let Some(s) = hop_record.successor {
                d.push_str(&format!(" succ={}", t.name(s)));
            }
            d.push_str(&format!(" flag={}", u8::from(hop_record.on_optimum_flag)));
            if !hop_record.bypass_route.is_empty() {
                d.push_str(&format!(" bypass={}", t.path_label(&hop_record.bypass_route)));
            }
            d
        });

        let now = self.now;
        let b = self.bursts.get_mut(&burst).expect("checked above");
        b.header_hops.push(hop_record);
        b.hops.truncate(hop);
        debug_assert_eq!(b.hops.len(), hop);
        b.hops.push(HopEntry {
            node,
            ready_at: now,
            decision,
            header_in: header,
            payload_passed: false,
        });

        if let Some((successor, out_header)) = out {
            let link = self.sc.topology.link_between(node, successor).expect("successor is adjacent");
            b.header_tx.push(Transmission {
                link,
                from: node,
                to: successor,
                at: now,
            });
            let deadline = self.nodes[node.index()].arm_ack_timer(burst, successor, now, &self.sc.protocol);
            self.schedule(
                deadline,
                EventKind::AckTimeout {
                    node,
                    burst,
                    successor,
                    hop,
                },
            );
            if self.physical.link(link).is_up() {
                let epoch = self.link_epoch[link.index()];
                let delay = self.physical.link(link).delay;
                self.schedule(
                    now + delay,
                    EventKind::BcpArrival {
                        node: successor,
                        from: node,
                        burst,
                        hop: hop + 1,
                        gen,
                        header: out_header,
                        link,
                        epoch,
                    },
                );
            } else {
                self.bursts.get_mut(&burst).expect("exists").header_lost = true;
                self.record("bcp_lost", Some(node), Some(burst), |t| t.link_label(link));
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on_bcp_arrival(
        &mut self,
        node: NodeId,
        from: NodeId,
        burst: u64,
        hop: usize,
        gen: u32,
        header: BurstControlPacket,
        link: LinkId,
        epoch: u64,
    ) {
        let current = self.bursts.get(&burst).is_some_and(|b| b.header_gen == gen);
        if !self.link_intact(link, epoch) {
            if current {
                self.bursts.get_mut(&burst).expect("exists").header_lost = true;
            }
            self.record("bcp_lost", Some(node), Some(burst), |t| t.link_label(link));
            return;
        }
        self.record("bcp_arrival", Some(node), Some(burst), |t| {
            format!("hop={hop} from={}", t.name(from))
        });
        // Ack back to the sender on the same link.
        if self.physical.link(link).is_up() {
            let delay = self.physical.link(link).delay;
            let ack_epoch = self.link_epoch[link.index()];
            self.schedule(
                self.now + delay,
                EventKind::AckArrival {
                    node: from,
                    burst,
                    successor: node,
                    link,
                    epoch: ack_epoch,
                },
            );
        }
        if current {
            let due = self.now + self.sc.protocol.t_h;
            self.bursts.get_mut(&burst).expect("exists").header_due = Some((hop, due));
            self.schedule(
                due,
                EventKind::HeaderDone {
                    node,
                    burst,
                    hop,
                    gen,
                    header,
                },
            );
        }
    }

    fn on_ack_timeout(&mut self, node: NodeId, burst: u64, successor: NodeId, hop: usize) {
        let now = self.now;
        let Some(outcome) = self.nodes[node.index()].on_ack_timeout(burst, successor, &self.view, now) else {
            return;
        };
        self.metrics.protocol.ack_timeouts += 1;
        if outcome.newly_suspected {
            self.metrics.protocol.links_suspected += 1;
            for (spec, rec) in &mut self.faults {
                let active = spec.fail_at <= now && spec.repair_at.is_none_or(|r| now < r);
                if spec.link == outcome.link && active && rec.detected_at_us.is_none() {
                    rec.detected_at_us = Some(now.0);
                }
            }
        }
        self.record("ack_timeout", Some(node), Some(burst), |t| {
            format!(
                "succ={} link={} new={}",
                t.name(successor),
                t.link_label(outcome.link),
                outcome.newly_suspected
            )
        });

        // If the payload has not yet passed this node, reprocess the header
        // with the new knowledge. Until that finishes the switch keeps its
        // old setting.
        let t_h = self.sc.protocol.t_h;
        let Some(b) = self.bursts.get_mut(&burst) else {
            return;
        };
        if b.status != BurstStatus::InFlight {
            return;
        }
        let Some(entry) = b.hops.get_mut(hop) else {
            return;
        };
        if entry.node != node || entry.decision != Decision::Forward(successor) || entry.payload_passed {
            return;
        }
        let header = entry.header_in.clone();
        b.header_gen += 1;
        b.header_lost = false;
        let gen = b.header_gen;
        self.record("bcp_reprocess", Some(node), Some(burst), |_| format!("hop={hop}"));
        self.schedule(
            now + t_h,
            EventKind::HeaderDone {
                node,
                burst,
                hop,
                gen,
                header,
            },
        );
    }

    fn on_link_fail(&mut self, link: LinkId) {
        let was_up = self.physical.link(link).is_up();
        self.physical.set_link_state_by_id(link, LinkState::Down);
        self.link_epoch[link.index()] += 1;
        self.record("link_fail", None, None, |t| t.link_label(link));
        let l = self.physical.link(link).clone();
        for n in [l.a, l.b] {
            if let Some(rec) = monitor_loss_of_light(&self.physical, n, link, was_up, false, self.now) {
                self.metrics.protocol.loss_of_light.push(LossOfLightRecord {
                    node: self.sc.topology.name(rec.node).to_string(),
                    link: self.sc.topology.link_label(rec.link),
                    at_us: rec.at.0,
                });
                self.record("loss_of_light", Some(n), None, |t| t.link_label(link));
            }
        }
    }

    fn on_payload(&mut self, node: NodeId, burst: u64, hop: usize, copy: usize, via: Option<(LinkId, u64)>) {
        let Some(b) = self.bursts.get(&burst) else {
            return;
        };
        let in_flight = b.status == BurstStatus::InFlight;
        let entry = b.hops.get(hop).filter(|e| e.node == node).cloned();
        let header_lost = b.header_lost;
        let header_due = b.header_due;
        let key = (b.bdp.source_node, b.bdp.dest_node);
        if let Some((link, epoch)) = via {
            if !self.link_intact(link, epoch) {
                self.record("bdp_lost", Some(node), Some(burst), |t| {
                    format!("copy={copy} link={}", t.link_label(link))
                });
                self.copy_lost(burst, LossReason::LinkFailure);
                return;
            }
        }
        if !in_flight && self.sc.mode == Mode::Restoration {
            return;
        }
        if self.sc.mode == Mode::Restoration && entry.is_none() && !header_lost && header_due == Some((hop, self.now)) {
            // The header finishes on this same tick; let its decision land first.
            self.schedule(
                self.now,
                EventKind::Payload {
                    node,
                    burst,
                    hop,
                    copy,
                    via,
                },
            );
            return;
        }
        self.record(if via.is_none() { "bdp_departure" } else { "bdp_arrival" }, Some(node), Some(burst), |_| {
            format!("hop={hop} copy={copy}")
        });
        match self.sc.mode {
            Mode::Restoration => {
                let now = self.now;
                let Some(entry) = entry else {
                    let reason = if header_lost {
                        LossReason::LinkFailure
                    } else {
                        LossReason::OffsetViolation
                    };
                    self.lose(burst, reason);
                    return;
                };
                if now < entry.ready_at {
                    self.lose(burst, LossReason::OffsetViolation);
                    return;
                }
                match entry.decision {
                    Decision::Terminate => self.deliver(burst),
                    Decision::Dropped(r) => self.lose(burst, r),
                    Decision::Forward(next) => {
                        self.bursts.get_mut(&burst).expect("exists").hops[hop].payload_passed = true;
                        self.send_payload(burst, node, next, hop, copy);
                    }
                }
            }
            Mode::Protection => {
                let path = &self.protection[&key][copy];
                if hop + 1 == path.nodes.len() {
                    self.deliver(burst);
                } else {
                    let next = path.nodes[hop + 1];
                    self.send_payload(burst, node, next, hop, copy);
                }
            }
        }
    }

    fn send_payload(&mut self, burst: u64, from: NodeId, to: NodeId, hop: usize, copy: usize) {
        let link = self.sc.topology.link_between(from, to).expect("adjacent");
        let now = self.now;
        let b = self.bursts.get_mut(&burst).expect("exists");
        self.metrics.link_bytes[link.index()] += b.bdp.total_bytes;
        b.payload_tx.push(Transmission { link, from, to, at: now });
        if !self.physical.link(link).is_up() {
            self.record("bdp_lost", Some(from), Some(burst), |t| {
                format!("copy={copy} link={}", t.link_label(link))
            });
            self.copy_lost(burst, LossReason::LinkFailure);
            return;
        }
        let epoch = self.link_epoch[link.index()];
        let delay = self.physical.link(link).delay;
        self.schedule(
            now + delay,
            EventKind::Payload {
                node: to,
                burst,
                hop: hop + 1,
                copy,
                via: Some((link, epoch)),
            },
        );
    }

    fn copy_lost(&mut self, burst: u64, reason: LossReason) {
        let b = self.bursts.get_mut(&burst).expect("exists");
        b.copies_lost += 1;
        let copies = match self.sc.mode {
            Mode::Restoration => 1,
            Mode::Protection => 2,
        };
        if b.copies_lost >= copies {
            self.lose(burst, reason);
        }
    }

    fn deliver(&mut self, burst: u64) {
        let now = self.now;
        let b = self.bursts.get_mut(&burst).expect("exists");
        if b.status != BurstStatus::InFlight {
            return;
        }
        b.status = BurstStatus::Delivered { at: now };
        self.metrics.burst_delivered(&b.bdp, now);
        for (spec, rec) in &mut self.faults {
            let detoured = !b.payload_tx.iter().any(|t| t.link == spec.link);
            if now > spec.fail_at && b.primary_links.contains(&spec.link) && detoured {
                let t = rec.first_recovered_delivery_us.get_or_insert(now.0);
                *t = (*t).min(now.0);
                rec.recovery_time_us = Some(*t - spec.fail_at.0);
            }
        }
        let dest = b.bdp.dest_node;
        self.record("bdp_delivered", Some(dest), Some(burst), |_| String::new());
    }

    fn lose(&mut self, burst: u64, reason: LossReason) {
        let now = self.now;
        let b = self.bursts.get_mut(&burst).expect("exists");
        if b.status != BurstStatus::InFlight {
            return;
        }
        b.status = BurstStatus::Lost { at: now, reason };
        self.metrics.burst_lost(&b.bdp, reason);
        let src = b.bdp.source_node;
        self.record("burst_lost", Some(src), Some(burst), |_| reason.label().to_string());
    }

    fn finish(mut self) -> RunOutput {
        for edge in self.edges.values() {
            for p in edge.assembler.queued_packets() {
                self.metrics.packet_queued(p.class_index);
            }
        }
        let mut bursts = Vec::with_capacity(self.bursts.len());
        for (id, b) in std::mem::take(&mut self.bursts) {
            if b.status == BurstStatus::InFlight {
                self.metrics.burst_in_flight(&b.bdp);
            }
            bursts.push(BurstOutcome {
                burst_id: id,
                source: b.bdp.source_node,
                dest: b.bdp.dest_node,
                class_index: b.bdp.class_index,
                packets: b.bdp.packets.len(),
                bytes: b.bdp.total_bytes,
                assembled_at: b.bdp.assembled_at,
                status: b.status,
                primary_route: b.primary_route,
                header_hops: b.header_hops,
                header_transmissions: b.header_tx,
                payload_transmissions: b.payload_tx,
            });
        }
        let topo = &self.sc.topology;
        let labels = topo.links().map(|(id, _)| topo.link_label(id)).collect();
        let faults = self.faults.into_iter().map(|(_, r)| r).collect();
        let report = self
            .metrics
            .finish(self.sc.mode.name(), self.sc.horizon, self.sc.histogram_bin_bytes, labels, faults);
        RunOutput {
            report,
            trace: self.trace,
            bursts,
        }
    }
}

#[cfg(test)]
mod tests;
