//! TOML scenario files.
//!
//! Parsing happens in two stages. The text is first read into a loose
//! shape where every optional field may be missing; syntax errors and
//! malformed values stop here with a line and column. The loose shape is
//! then resolved against the topology, and every semantic problem is
//! collected with its field path before anything is returned.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::units::{Bytes, Duration};
use crate::assembly::{AasConfig, Algorithm, AssemblerConfig, FieldIssue, PriorityConfig};
use crate::engine::traffic::{LengthDist, ScriptedPacket, StreamConfig, TrafficConfig};
use crate::engine::{FaultSpec, Mode, Scenario};
use crate::model::{fixtures, LinkSpec, NodeId, SimTime, Topology, DEFAULT_LINK_DELAY};
use crate::protocol::ProtocolConfig;
use crate::routing::{GaConfig, Router};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("{}", issue_list(.0))]
    Invalid(Vec<FieldIssue>),
}

fn issue_list(issues: &[FieldIssue]) -> String {
    let mut s = format!("{} validation error(s):", issues.len());
    for i in issues {
        s.push_str(&format!("\n  {i}"));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    /// 1-based; zero when the parser gave no location.
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "syntax error: {}", self.message)
        } else {
            write!(f, "syntax error at line {}, column {}: {}", self.line, self.column, self.message)
        }
    }
}

fn syntax_error(text: &str, err: &toml::de::Error) -> SyntaxError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    SyntaxError {
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sim: Option<RawSim>,
    topology: RawTopology,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assembler: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    assemblers: BTreeMap<String, toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    protocol: Option<RawProtocol>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    traffic: Vec<RawStream>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    packets: Vec<RawPacket>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    faults: Vec<RawFault>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<Duration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    traffic_until: Option<Duration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    histogram_bin: Option<Bytes>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    /// `"figure1"` selects the built-in ten-node network.
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nodes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    default_delay: Option<Duration>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    links: Vec<RawLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    a: String,
    b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay: Option<Duration>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssembler {
    algorithm: Option<Algorithm>,
    period: Option<Duration>,
    size: Option<Bytes>,
    aas: Option<RawAas>,
    priority: Option<RawPriority>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAas {
    q_min: Option<Bytes>,
    q_max: Option<Bytes>,
    a: Option<f64>,
    delta_a: Option<Bytes>,
    max_period: Option<Duration>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriority {
    m_destinations: Option<usize>,
    n_classes: Option<usize>,
    l_max: Option<Vec<Bytes>>,
    t_max: Option<Vec<Duration>>,
    offset: Option<Vec<Duration>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RoutingKind {
    Exact,
    Ga,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    #[serde(skip_serializing_if = "Option::is_none")]
    t_h: Option<Duration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_s: Option<Duration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    routing: Option<RoutingKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ga: Option<RawGa>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGa {
    #[serde(skip_serializing_if = "Option::is_none")]
    population: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossover_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mutation_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawLength {
    Fixed(Bytes),
    Uniform { min: Bytes, max: Bytes },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStream {
    source: String,
    dest: String,
    #[serde(default)]
    class: usize,
    rate_pps: f64,
    length: RawLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPacket {
    at: Duration,
    source: String,
    dest: String,
    #[serde(default)]
    class: usize,
    length: Bytes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    /// The two endpoint names.
    link: [String; 2],
    fail_at: Duration,
    #[serde(skip_serializing_if = "Option::is_none")]
    repair_at: Option<Duration>,
}

/// Deep merge: keys in `over` replace or extend those in `base`.
fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn raw_assembler(path: &str, table: &toml::Table, issues: &mut Vec<FieldIssue>) -> Option<AssemblerConfig> {
    let raw: RawAssembler = match toml::Value::Table(table.clone()).try_into() {
        Ok(r) => r,
        Err(e) => {
            issues.push(FieldIssue::new(path, e.message().trim().to_string()));
            return None;
        }
    };
    let d = AssemblerConfig::default();
    let aas = raw.aas.unwrap_or_default();
    let pri = raw.priority.unwrap_or_default();
    let n_classes = pri.n_classes.unwrap_or(d.priority.n_classes);
    // Per-class lists default to the built-in values only when the class
    // count is unchanged; otherwise they must be given.
    let same_classes = n_classes == d.priority.n_classes;
    fn class_default<T: Clone>(same: bool, v: &[T]) -> Vec<T> {
        if same {
            v.to_vec()
        } else {
            Vec::new()
        }
    }
    Some(AssemblerConfig {
        algorithm: raw.algorithm.unwrap_or(d.algorithm),
        period_threshold: raw.period.map_or(d.period_threshold, |x| x.0),
        size_threshold: raw.size.map_or(d.size_threshold, |x| x.0),
        aas: AasConfig {
            q_min: aas.q_min.map_or(d.aas.q_min, |x| x.0),
            q_max: aas.q_max.map_or(d.aas.q_max, |x| x.0),
            a: aas.a.unwrap_or(d.aas.a),
            delta_a: aas.delta_a.map_or(d.aas.delta_a, |x| x.0),
            max_period: aas.max_period.map_or(d.aas.max_period, |x| x.0),
        },
        priority: PriorityConfig {
            m_destinations: pri.m_destinations.unwrap_or(d.priority.m_destinations),
            n_classes,
            l_max: pri
                .l_max
                .map(|v| v.into_iter().map(|x| x.0).collect())
                .unwrap_or_else(|| class_default(same_classes, &d.priority.l_max)),
            t_max: pri
                .t_max
                .map(|v| v.into_iter().map(|x| x.0).collect())
                .unwrap_or_else(|| class_default(same_classes, &d.priority.t_max)),
            offset: pri
                .offset
                .map(|v| v.into_iter().map(|x| x.0).collect())
                .unwrap_or_else(|| vec![SimTime::ZERO; n_classes]),
        },
    })
}

fn build_topology(raw: &RawTopology, issues: &mut Vec<FieldIssue>) -> Option<Topology> {
    match raw.preset.as_deref() {
        Some("figure1") => {
            if !raw.nodes.is_empty() || !raw.links.is_empty() {
                issues.push(FieldIssue::new("topology.preset", "cannot be combined with nodes or links"));
                return None;
            }
            let delay = raw.default_delay.map_or(DEFAULT_LINK_DELAY, |d| d.0);
            let specs: Vec<LinkSpec> = fixtures::figure1_link_specs().into_iter().map(|l| l.with_delay(delay)).collect();
            return Topology::build(&fixtures::FIGURE1_NODES, &specs).ok();
        }
        Some(other) => {
            issues.push(FieldIssue::new("topology.preset", format!("unknown preset {other:?} (expected \"figure1\")")));
            return None;
        }
        None => {}
    }
    let before = issues.len();
    if raw.nodes.is_empty() {
        issues.push(FieldIssue::new("topology.nodes", "must list at least one node"));
    }
    let mut seen = BTreeMap::new();
    for (i, name) in raw.nodes.iter().enumerate() {
        if name.is_empty() {
            issues.push(FieldIssue::new(format!("topology.nodes[{i}]"), "must not be empty"));
        }
        if seen.insert(name.as_str(), i).is_some() {
            issues.push(FieldIssue::new(format!("topology.nodes[{i}]"), format!("duplicate node {name:?}")));
        }
    }
    let mut pairs = BTreeMap::new();
    for (i, l) in raw.links.iter().enumerate() {
        for (field, name) in [("a", &l.a), ("b", &l.b)] {
            if !seen.contains_key(name.as_str()) {
                issues.push(FieldIssue::new(format!("topology.links[{i}].{field}"), format!("unknown node {name:?}")));
            }
        }
        if l.a == l.b {
            issues.push(FieldIssue::new(format!("topology.links[{i}]"), "self-loop"));
        }
        let key = if l.a <= l.b { (&l.a, &l.b) } else { (&l.b, &l.a) };
        if pairs.insert(key, i).is_some() {
            issues.push(FieldIssue::new(
                format!("topology.links[{i}]"),
                format!("duplicate link {}-{}", l.a, l.b),
            ));
        }
        if let Some(w) = l.weight {
            if !w.is_finite() || w <= 0.0 {
                issues.push(FieldIssue::new(format!("topology.links[{i}].weight"), "must be positive and finite"));
            }
        }
        if l.delay.is_some_and(|d| d.0 == SimTime::ZERO) {
            issues.push(FieldIssue::new(format!("topology.links[{i}].delay"), "must be positive"));
        }
    }
    if raw.default_delay.is_some_and(|d| d.0 == SimTime::ZERO) {
        issues.push(FieldIssue::new("topology.default_delay", "must be positive"));
    }
    if issues.len() > before {
        return None;
    }
    let default_delay = raw.default_delay.map_or(DEFAULT_LINK_DELAY, |d| d.0);
    let specs: Vec<LinkSpec> = raw
        .links
        .iter()
        .map(|l| LinkSpec::new(&l.a, &l.b, l.weight.unwrap_or(1.0)).with_delay(l.delay.map_or(default_delay, |d| d.0)))
        .collect();
    match Topology::build(&raw.nodes, &specs) {
        Ok(t) => Some(t),
        Err(e) => {
            issues.push(FieldIssue::new("topology", e.to_string()));
            None
        }
    }
}

fn resolve(raw: RawFile) -> Result<Scenario, Vec<FieldIssue>> {
    let mut issues = Vec::new();
    let topology = build_topology(&raw.topology, &mut issues);

    let base_table = raw.assembler.clone().unwrap_or_default();
    let assembler = raw_assembler("assembler", &base_table, &mut issues);
    let mut overrides = BTreeMap::new();
    for (name, table) in &raw.assemblers {
        let path = format!("assemblers.{name}");
        let mut merged = base_table.clone();
        merge(&mut merged, table);
        let cfg = raw_assembler(&path, &merged, &mut issues);
        match topology.as_ref().map(|t| t.node_id(name)) {
            Some(None) => issues.push(FieldIssue::new(path, format!("unknown node {name:?}"))),
            Some(Some(id)) => {
                if let Some(cfg) = cfg {
                    overrides.insert(id, cfg);
                }
            }
            None => {}
        }
    }

    let sim = raw.sim.unwrap_or_default();
    let proto = raw.protocol.unwrap_or_default();
    let dp = ProtocolConfig::default();
    let seed = sim.seed.unwrap_or(DEFAULT_SEED);
    let router = match proto.routing.unwrap_or(RoutingKind::Exact) {
        RoutingKind::Exact => {
            if proto.ga.is_some() {
                issues.push(FieldIssue::new("protocol.ga", "only allowed with routing = \"ga\""));
            }
            Router::Exact
        }
        RoutingKind::Ga => {
            let g = proto.ga.unwrap_or_default();
            let d = GaConfig::default();
            Router::Genetic(GaConfig {
                population_size: g.population.unwrap_or(d.population_size),
                generations: g.generations.unwrap_or(d.generations),
                crossover_rate: g.crossover_rate.unwrap_or(d.crossover_rate),
                mutation_rate: g.mutation_rate.unwrap_or(d.mutation_rate),
                rng_seed: g.seed.unwrap_or(seed),
            })
        }
    };
    let protocol = ProtocolConfig {
        t_h: proto.t_h.map_or(dp.t_h, |d| d.0),
        t_s: proto.t_s.map_or(dp.t_s, |d| d.0),
        router,
    };

    let Some(topology) = topology else {
        return Err(issues);
    };
    let node = |path: String, name: &str, issues: &mut Vec<FieldIssue>| -> Option<NodeId> {
        let id = topology.node_id(name);
        if id.is_none() {
            issues.push(FieldIssue::new(path, format!("unknown node {name:?}")));
        }
        id
    };

    // Original positions of the entries that resolved, so later issues
    // still point at the right table.
    let mut origin: [(&str, Vec<usize>); 3] = [("traffic", Vec::new()), ("packets", Vec::new()), ("faults", Vec::new())];
    let mut streams = Vec::new();
    for (i, s) in raw.traffic.iter().enumerate() {
        let src = node(format!("traffic[{i}].source"), &s.source, &mut issues);
        let dst = node(format!("traffic[{i}].dest"), &s.dest, &mut issues);
        let length = match s.length {
            RawLength::Fixed(b) => LengthDist::Fixed(b.0),
            RawLength::Uniform { min, max } => LengthDist::Uniform { min: min.0, max: max.0 },
        };
        if let (Some(source), Some(dest)) = (src, dst) {
            origin[0].1.push(i);
            streams.push(StreamConfig {
                source,
                dest,
                class_index: s.class,
                rate_pps: s.rate_pps,
                length,
            });
        }
    }
    let mut scripted = Vec::new();
    for (i, p) in raw.packets.iter().enumerate() {
        let src = node(format!("packets[{i}].source"), &p.source, &mut issues);
        let dst = node(format!("packets[{i}].dest"), &p.dest, &mut issues);
        if let (Some(source), Some(dest)) = (src, dst) {
            origin[1].1.push(i);
            scripted.push(ScriptedPacket {
                at: p.at.0,
                source,
                dest,
                class_index: p.class,
                length: p.length.0,
            });
        }
    }
    let mut faults = Vec::new();
    for (i, f) in raw.faults.iter().enumerate() {
        let a = node(format!("faults[{i}].link"), &f.link[0], &mut issues);
        let b = node(format!("faults[{i}].link"), &f.link[1], &mut issues);
        let (Some(a), Some(b)) = (a, b) else { continue };
        match topology.link_between(a, b) {
            Some(link) => {
                origin[2].1.push(i);
                faults.push(FaultSpec {
                    link,
                    fail_at: f.fail_at.0,
                    repair_at: f.repair_at.map(|d| d.0),
                });
            }
            None => issues.push(FieldIssue::new(
                format!("faults[{i}].link"),
                format!("no link between {} and {}", f.link[0], f.link[1]),
            )),
        }
    }

    let horizon = sim.horizon.map_or(Scenario::DEFAULT_HORIZON, |d| d.0);
    let scenario = Scenario {
        topology,
        traffic: TrafficConfig { streams, scripted, seed },
        assembler: assembler.unwrap_or_default(),
        assembler_overrides: overrides,
        protocol,
        mode: sim.mode.unwrap_or(Mode::Restoration),
        faults,
        horizon,
        traffic_until: sim.traffic_until.map_or(horizon, |d| d.0),
        histogram_bin_bytes: sim.histogram_bin.map_or(Scenario::DEFAULT_HISTOGRAM_BIN, |b| b.0),
    };
    issues.extend(scenario.validate().into_iter().map(|i| restore_index(i, &origin)));
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(issues)
    }
}

/// Rewrites `table[j]` in an issue path to the entry's index in the file.
fn restore_index(mut issue: FieldIssue, origin: &[(&str, Vec<usize>)]) -> FieldIssue {
    for (table, map) in origin {
        let Some(rest) = issue.path.strip_prefix(table).and_then(|r| r.strip_prefix('[')) else {
            continue;
        };
        let Some((j, tail)) = rest.split_once(']') else { continue };
        if let Some(&i) = j.parse::<usize>().ok().and_then(|j| map.get(j)) {
            issue.path = format!("{table}[{i}]{tail}");
        }
    }
    issue
}

/// Parses and fully validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ScenarioError::Syntax(syntax_error(text, &e)))?;
    resolve(raw).map_err(ScenarioError::Invalid)
}

pub fn load_scenario(path: &FsPath) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

fn assembler_table(c: &AssemblerConfig) -> toml::Table {
    let raw = RawAssembler {
        algorithm: Some(c.algorithm),
        period: Some(Duration(c.period_threshold)),
        size: Some(Bytes(c.size_threshold)),
        aas: Some(RawAas {
            q_min: Some(Bytes(c.aas.q_min)),
            q_max: Some(Bytes(c.aas.q_max)),
            a: Some(c.aas.a),
            delta_a: Some(Bytes(c.aas.delta_a)),
            max_period: Some(Duration(c.aas.max_period)),
        }),
        priority: Some(RawPriority {
            m_destinations: Some(c.priority.m_destinations),
            n_classes: Some(c.priority.n_classes),
            l_max: Some(c.priority.l_max.iter().map(|&b| Bytes(b)).collect()),
            t_max: Some(c.priority.t_max.iter().map(|&t| Duration(t)).collect()),
            offset: Some(c.priority.offset.iter().map(|&t| Duration(t)).collect()),
        }),
    };
    toml::Table::try_from(raw).expect("assembler config serializes")
}

/// Writes every field explicitly, so the output documents the defaults
/// it relied on. Parsing the result yields an identical scenario.
pub fn serialize_scenario(sc: &Scenario) -> String {
    let t = &sc.topology;
    let name = |id: NodeId| t.name(id).to_string();
    let (routing, ga) = match &sc.protocol.router {
        Router::Exact => (RoutingKind::Exact, None),
        Router::Genetic(g) => (
            RoutingKind::Ga,
            Some(RawGa {
                population: Some(g.population_size),
                generations: Some(g.generations),
                crossover_rate: Some(g.crossover_rate),
                mutation_rate: Some(g.mutation_rate),
                seed: Some(g.rng_seed),
            }),
        ),
    };
    let raw = RawFile {
        sim: Some(RawSim {
            horizon: Some(Duration(sc.horizon)),
            traffic_until: Some(Duration(sc.traffic_until)),
            seed: Some(sc.traffic.seed),
            mode: Some(sc.mode),
            histogram_bin: Some(Bytes(sc.histogram_bin_bytes)),
        }),
        topology: RawTopology {
            preset: None,
            nodes: t.names().to_vec(),
            default_delay: None,
            links: t
                .links()
                .map(|(_, l)| RawLink {
                    a: name(l.a),
                    b: name(l.b),
                    weight: Some(l.weight),
                    delay: Some(Duration(l.delay)),
                })
                .collect(),
        },
        assembler: Some(assembler_table(&sc.assembler)),
        assemblers: sc
            .assembler_overrides
            .iter()
            .map(|(&id, c)| (name(id), assembler_table(c)))
            .collect(),
        protocol: Some(RawProtocol {
            t_h: Some(Duration(sc.protocol.t_h)),
            t_s: Some(Duration(sc.protocol.t_s)),
            routing: Some(routing),
            ga,
        }),
        traffic: sc
            .traffic
            .streams
            .iter()
            .map(|s| RawStream {
                source: name(s.source),
                dest: name(s.dest),
                class: s.class_index,
                rate_pps: s.rate_pps,
                length: match s.length {
                    LengthDist::Fixed(b) => RawLength::Fixed(Bytes(b)),
                    LengthDist::Uniform { min, max } => RawLength::Uniform {
                        min: Bytes(min),
                        max: Bytes(max),
                    },
                },
            })
            .collect(),
        packets: sc
            .traffic
            .scripted
            .iter()
            .map(|p| RawPacket {
                at: Duration(p.at),
                source: name(p.source),
                dest: name(p.dest),
                class: p.class_index,
                length: Bytes(p.length),
            })
            .collect(),
        faults: sc
            .faults
            .iter()
            .map(|f| {
                let l = t.link(f.link);
                RawFault {
                    link: [name(l.a), name(l.b)],
                    fail_at: Duration(f.fail_at),
                    repair_at: f.repair_at.map(Duration),
                }
            })
            .collect(),
    };
    toml::to_string(&raw).expect("scenario serializes")
}

/// Figure 1 network with one Poisson stream from N1 to N10 and every
/// other setting at its default.
pub fn default_scenario() -> Scenario {
    let topo = fixtures::figure1();
    let mut sc = Scenario::new(topo.clone());
    sc.traffic = TrafficConfig {
        streams: vec![StreamConfig {
            source: topo.node_id("N1").expect("fixture node"),
            dest: topo.node_id("N10").expect("fixture node"),
            class_index: 0,
            rate_pps: 10_000.0,
            length: LengthDist::Uniform { min: 100, max: 1_500 },
        }],
        scripted: Vec::new(),
        seed: DEFAULT_SEED,
    };
    sc
}
