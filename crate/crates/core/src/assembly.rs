//! Edge-node burst assembly.
//!
//! Every algorithm is a per-queue state machine driven by two inputs:
//! a packet arrival and a timer expiry. Queues are keyed by
//! (class, destination) so a burst never mixes either. The rules:
//!
//! * `Fap`: emit when the head-of-queue packet has waited `period`.
//! * `Fas`: emit when the arriving packet would push the queue past
//!   `size`; the newcomer opens the next queue. No timer.
//! * `Msmap`: `Fas` and `Fap` combined, whichever fires first. When both
//!   are due on the same tick the timer is handled first.
//! * `Aas`: `Msmap` with the size threshold taken from a sliding window
//!   `[q_low, q_high]` that moves by `delta_a` after each emission.
//! * `PriorityAas`: one `Msmap` queue per (class, destination) with the
//!   class-specific byte limit and timer.
//!
//! A packet longer than the size threshold is emitted alone immediately
//! for every algorithm that has one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BurstDataPacket, NodeId, Packet, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fap,
    Fas,
    Msmap,
    Aas,
    #[serde(rename = "priority_aas")]
    PriorityAas,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Fap,
        Algorithm::Fas,
        Algorithm::Msmap,
        Algorithm::Aas,
        Algorithm::PriorityAas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fap => "fap",
            Algorithm::Fas => "fas",
            Algorithm::Msmap => "msmap",
            Algorithm::Aas => "aas",
            Algorithm::PriorityAas => "priority_aas",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown assembly algorithm {s:?} (expected fap, fas, msmap, aas or priority_aas)"))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AasConfig {
    /// Smallest burst length; also the initial `q_low`.
    pub q_min: u64,
    pub q_max: u64,
    pub a: f64,
    pub delta_a: u64,
    pub max_period: SimTime,
}

impl AasConfig {
    /// `q_high - q_low`, held constant while the window slides.
    pub fn window_width(&self) -> u64 {
        (self.a * self.delta_a as f64).round() as u64
    }
}

impl Default for AasConfig {
    fn default() -> Self {
        AasConfig {
            q_min: 4_000,
            q_max: 40_000,
            a: 2.0,
            delta_a: 2_000,
            max_period: SimTime(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub m_destinations: usize,
    pub n_classes: usize,
    pub l_max: Vec<u64>,
    pub t_max: Vec<SimTime>,
    pub offset: Vec<SimTime>,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        PriorityConfig {
            m_destinations: 64,
            n_classes: 2,
            l_max: vec![10_000, 20_000],
            t_max: vec![SimTime(100), SimTime(300)],
            offset: vec![SimTime(0), SimTime(0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblerConfig {
    pub algorithm: Algorithm,
    /// Head-of-queue delay limit for FAP and MSMAP.
    pub period_threshold: SimTime,
    /// Byte threshold for FAS and MSMAP.
    pub size_threshold: u64,
    pub aas: AasConfig,
    pub priority: PriorityConfig,
}

impl Default for AssemblerConfig {
    fn default() -> Self {
        AssemblerConfig {
            algorithm: Algorithm::Fap,
            period_threshold: SimTime(100),
            size_threshold: 10_000,
            aas: AasConfig::default(),
            priority: PriorityConfig::default(),
        }
    }
}

/// A configuration problem, reported with the offending field's path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl FieldIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldIssue {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl AssemblerConfig {
    /// Checks the thresholds the selected algorithm depends on.
    pub fn validate(&self) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        let needs_period = matches!(self.algorithm, Algorithm::Fap | Algorithm::Msmap);
        let needs_size = matches!(self.algorithm, Algorithm::Fas | Algorithm::Msmap);
        if needs_period && self.period_threshold == SimTime::ZERO {
            issues.push(FieldIssue::new("period", "must be positive"));
        }
        if needs_size && self.size_threshold == 0 {
            issues.push(FieldIssue::new("size", "must be positive"));
        }
        if self.algorithm == Algorithm::Aas {
            let c = &self.aas;
            if !c.a.is_finite() || c.a <= 0.0 {
                issues.push(FieldIssue::new("aas.a", "must be positive"));
            }
            if c.delta_a == 0 {
                issues.push(FieldIssue::new("aas.delta_a", "must be positive"));
            }
            if c.q_min == 0 {
                issues.push(FieldIssue::new("aas.q_min", "must be positive"));
            }
            if c.q_min >= c.q_max {
                issues.push(FieldIssue::new("aas.q_max", "must exceed q_min"));
            } else if c.a > 0.0 && c.delta_a > 0 {
                let w = c.window_width();
                if w == 0 || c.q_min + w > c.q_max {
                    issues.push(FieldIssue::new(
                        "aas.a",
                        format!("window a*delta_a = {w} must be positive and fit within [q_min, q_max]"),
                    ));
                }
            }
            if c.max_period == SimTime::ZERO {
                issues.push(FieldIssue::new("aas.max_period", "must be positive"));
            }
        }
        if self.algorithm == Algorithm::PriorityAas {
            let c = &self.priority;
            if c.n_classes == 0 {
                issues.push(FieldIssue::new("priority.n_classes", "must be positive"));
            }
            if c.m_destinations == 0 {
                issues.push(FieldIssue::new("priority.m_destinations", "must be positive"));
            }
            for (name, len) in [("l_max", c.l_max.len()), ("t_max", c.t_max.len()), ("offset", c.offset.len())] {
                if len != c.n_classes {
                    issues.push(FieldIssue::new(
                        format!("priority.{name}"),
                        format!("has {len} entries, expected n_classes = {}", c.n_classes),
                    ));
                }
            }
            for (i, &l) in c.l_max.iter().enumerate() {
                if l == 0 {
                    issues.push(FieldIssue::new(format!("priority.l_max[{i}]"), "must be positive"));
                }
            }
            for (i, &t) in c.t_max.iter().enumerate() {
                if t == SimTime::ZERO {
                    issues.push(FieldIssue::new(format!("priority.t_max[{i}]"), "must be positive"));
                }
            }
        }
        issues
    }

    /// Per-class offset added to the header offset. Zero unless priority
    /// assembly is in use.
    pub fn class_offset(&self, class_index: usize) -> SimTime {
        match self.algorithm {
            Algorithm::PriorityAas => self.priority.offset.get(class_index).copied().unwrap_or_default(),
            _ => SimTime::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("packet {packet} has class {class}, but only {n_classes} classes are configured")]
    ClassOutOfRange { packet: u64, class: usize, n_classes: usize },
    #[error("packet {packet} targets destination index {dest}, but only {m_destinations} destinations are configured")]
    DestinationOutOfRange { packet: u64, dest: usize, m_destinations: usize },
}

/// Sliding AAS window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AasWindow {
    pub q_low: u64,
    pub q_high: u64,
    q_min: u64,
    q_max: u64,
    delta_a: u64,
    width: u64,
}

impl AasWindow {
    pub fn new(cfg: &AasConfig) -> Self {
        let width = cfg.window_width();
        AasWindow {
            q_low: cfg.q_min,
            q_high: cfg.q_min + width,
            q_min: cfg.q_min,
            q_max: cfg.q_max,
            delta_a: cfg.delta_a,
            width,
        }
    }

    /// Window at an arbitrary position, clamped into range.
    pub fn at(cfg: &AasConfig, q_low: u64) -> Self {
        let mut w = AasWindow::new(cfg);
        w.q_low = q_low.clamp(w.q_min, w.q_max - w.width);
        w.q_high = w.q_low + w.width;
        w
    }

    /// Slides up after a burst that reached `q_high`, down after one no
    /// larger than `q_low`, otherwise holds.
    pub fn update(&mut self, emitted_bytes: u64) {
        if emitted_bytes >= self.q_high {
            self.q_low = (self.q_low + self.delta_a).min(self.q_max - self.width);
        } else if emitted_bytes <= self.q_low {
            self.q_low = self.q_low.saturating_sub(self.delta_a).max(self.q_min);
        }
        self.q_high = self.q_low + self.width;
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Discipline {
    Fap { period: SimTime },
    Fas { size: u64 },
    Msmap { size: u64, period: SimTime },
    Aas { window: AasWindow, max_period: SimTime },
}

/// An assembled packet group, before it is stamped with a burst id.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub at: SimTime,
    pub packets: Vec<Packet>,
}

impl Emission {
    pub fn bytes(&self) -> u64 {
        self.packets.iter().map(|p| p.length_bytes).sum()
    }
}

/// A single assembly queue and the rule that empties it.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMachine {
    discipline: Discipline,
    packets: Vec<Packet>,
    bytes: u64,
    epoch_start: Option<SimTime>,
}

impl QueueMachine {
    fn with(discipline: Discipline) -> Self {
        QueueMachine {
            discipline,
            packets: Vec::new(),
            bytes: 0,
            epoch_start: None,
        }
    }

    pub fn fap(period: SimTime) -> Self {
        Self::with(Discipline::Fap { period })
    }

    pub fn fas(size: u64) -> Self {
        Self::with(Discipline::Fas { size })
    }

    pub fn msmap(size: u64, period: SimTime) -> Self {
        Self::with(Discipline::Msmap { size, period })
    }

    pub fn aas(cfg: &AasConfig) -> Self {
        Self::aas_with_window(AasWindow::new(cfg), cfg.max_period)
    }

    pub fn aas_with_window(window: AasWindow, max_period: SimTime) -> Self {
        Self::with(Discipline::Aas { window, max_period })
    }

    /// The queue for class `class` under priority assembly.
    pub fn priority(cfg: &PriorityConfig, class: usize) -> Self {
        Self::msmap(cfg.l_max[class], cfg.t_max[class])
    }

    fn size_limit(&self) -> Option<u64> {
        match &self.discipline {
            Discipline::Fap { .. } => None,
            Discipline::Fas { size } | Discipline::Msmap { size, .. } => Some(*size),
            Discipline::Aas { window, .. } => Some(window.q_high),
        }
    }

    fn period(&self) -> Option<SimTime> {
        match &self.discipline {
            Discipline::Fas { .. } => None,
            Discipline::Fap { period } | Discipline::Msmap { period, .. } => Some(*period),
            Discipline::Aas { max_period, .. } => Some(*max_period),
        }
    }

    pub fn deadline(&self) -> Option<SimTime> {
        Some(self.epoch_start? + self.period()?)
    }

    pub fn window(&self) -> Option<&AasWindow> {
        match &self.discipline {
            Discipline::Aas { window, .. } => Some(window),
            _ => None,
        }
    }

    pub fn queued(&self) -> &[Packet] {
        &self.packets
    }

    pub fn queued_bytes(&self) -> u64 {
        self.bytes
    }

    pub fn epoch_start(&self) -> Option<SimTime> {
        self.epoch_start
    }

    fn emit(&mut self, at: SimTime) -> Emission {
        let packets = std::mem::take(&mut self.packets);
        let bytes = std::mem::replace(&mut self.bytes, 0);
        self.epoch_start = None;
        if let Discipline::Aas { window, .. } = &mut self.discipline {
            window.update(bytes);
        }
        Emission { at, packets }
    }

    /// Timer expiry. Emits the queue if its deadline is at or before `now`;
    /// a fire for an already-emptied epoch is a no-op.
    pub fn on_timer(&mut self, now: SimTime) -> Option<Emission> {
        match self.deadline() {
            Some(d) if d <= now => Some(self.emit(d)),
            _ => None,
        }
    }

    /// Packet arrival at `now`. A timer due at `now` is processed first.
    pub fn on_packet(&mut self, packet: Packet, now: SimTime) -> Vec<Emission> {
        let mut out = Vec::new();
        out.extend(self.on_timer(now));
        if let Some(limit) = self.size_limit() {
            if !self.packets.is_empty() && self.bytes + packet.length_bytes > limit {
                out.push(self.emit(now));
            }
            // The window may have moved; re-read the threshold.
            let limit = self.size_limit().unwrap_or(limit);
            if self.packets.is_empty() && packet.length_bytes > limit {
                self.packets.push(packet);
                self.bytes = self.packets[0].length_bytes;
                out.push(self.emit(now));
                return out;
            }
        }
        if self.packets.is_empty() {
            self.epoch_start = Some(now);
        }
        self.bytes += packet.length_bytes;
        self.packets.push(packet);
        out
    }
}

/// Monotonic burst id source shared by every assembler in a run.
#[derive(Debug, Clone, Default)]
pub struct BurstIds(u64);

impl BurstIds {
    pub fn starting_at(first: u64) -> Self {
        BurstIds(first)
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

type QueueKey = (usize, NodeId);

/// All assembly queues of one edge node.
#[derive(Debug, Clone)]
pub struct EdgeAssembler {
    config: AssemblerConfig,
    queues: BTreeMap<QueueKey, QueueMachine>,
}

impl EdgeAssembler {
    pub fn new(config: AssemblerConfig) -> Self {
        EdgeAssembler {
            config,
            queues: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &AssemblerConfig {
        &self.config
    }

    fn fresh_queue(&self, class: usize) -> QueueMachine {
        let c = &self.config;
        match c.algorithm {
            Algorithm::Fap => QueueMachine::fap(c.period_threshold),
            Algorithm::Fas => QueueMachine::fas(c.size_threshold),
            Algorithm::Msmap => QueueMachine::msmap(c.size_threshold, c.period_threshold),
            Algorithm::Aas => QueueMachine::aas(&c.aas),
            Algorithm::PriorityAas => QueueMachine::priority(&c.priority, class),
        }
    }

    fn check(&self, packet: &Packet) -> Result<(), AssemblyError> {
        if self.config.algorithm != Algorithm::PriorityAas {
            return Ok(());
        }
        let p = &self.config.priority;
        if packet.class_index >= p.n_classes {
            return Err(AssemblyError::ClassOutOfRange {
                packet: packet.id,
                class: packet.class_index,
                n_classes: p.n_classes,
            });
        }
        if packet.dest_node.index() >= p.m_destinations {
            return Err(AssemblyError::DestinationOutOfRange {
                packet: packet.id,
                dest: packet.dest_node.index(),
                m_destinations: p.m_destinations,
            });
        }
        Ok(())
    }

    fn stamp(emissions: Vec<Emission>, ids: &mut BurstIds) -> Vec<BurstDataPacket> {
        emissions
            .into_iter()
            .map(|e| BurstDataPacket::from_packets(ids.next_id(), e.packets, e.at))
            .collect()
    }

    /// Packet arrival. Any queue timers due at `now` fire first, so bursts
    /// come out in time order.
    pub fn on_packet(
        &mut self,
        packet: Packet,
        now: SimTime,
        ids: &mut BurstIds,
    ) -> Result<Vec<BurstDataPacket>, AssemblyError> {
        self.check(&packet)?;
        let mut out = self.on_timer(now, ids);
        let key = (packet.class_index, packet.dest_node);
        if !self.queues.contains_key(&key) {
            let q = self.fresh_queue(packet.class_index);
            self.queues.insert(key, q);
        }
        let queue = self.queues.get_mut(&key).expect("inserted above");
        out.extend(Self::stamp(queue.on_packet(packet, now), ids));
        Ok(out)
    }

    /// Fires every queue whose deadline is at or before `now`, in
    /// (deadline, class, destination) order.
    pub fn on_timer(&mut self, now: SimTime, ids: &mut BurstIds) -> Vec<BurstDataPacket> {
        let mut due: Vec<(SimTime, QueueKey)> = self
            .queues
            .iter()
            .filter_map(|(k, q)| q.deadline().filter(|&d| d <= now).map(|d| (d, *k)))
            .collect();
        due.sort();
        let emissions = due
            .into_iter()
            .filter_map(|(_, k)| self.queues.get_mut(&k).and_then(|q| q.on_timer(now)))
            .collect();
        Self::stamp(emissions, ids)
    }

    pub fn next_deadline(&self) -> Option<SimTime> {
        self.queues.values().filter_map(QueueMachine::deadline).min()
    }

    pub fn queued_packets(&self) -> impl Iterator<Item = &Packet> + '_ {
        self.queues.values().flat_map(|q| q.queued().iter())
    }

    pub fn queue(&self, class: usize, dest: NodeId) -> Option<&QueueMachine> {
        self.queues.get(&(class, dest))
    }
}
