//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

pub mod oracle;

use obsim::engine::traffic::{LengthDist, ScriptedPacket, StreamConfig};
use obsim::engine::{FaultSpec, Scenario};
use obsim::model::fixtures::figure1;
use obsim::model::{LinkId, LinkSpec, NodeId, SimTime, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn node(t: &Topology, name: &str) -> NodeId {
    t.node_id(name).unwrap_or_else(|| panic!("no node {name}"))
}

pub fn nodes(t: &Topology, names: &[&str]) -> Vec<NodeId> {
    names.iter().map(|n| node(t, n)).collect()
}

pub fn link(t: &Topology, a: &str, b: &str) -> LinkId {
    t.link_between(node(t, a), node(t, b)).expect("link exists")
}

pub fn stream(t: &Topology, src: &str, dst: &str, class: usize, rate_pps: f64) -> StreamConfig {
    StreamConfig {
        source: node(t, src),
        dest: node(t, dst),
        class_index: class,
        rate_pps,
        length: LengthDist::Uniform { min: 100, max: 1500 },
    }
}

pub fn scripted(t: &Topology, at: u64, src: &str, dst: &str, len: u64) -> ScriptedPacket {
    ScriptedPacket {
        at: SimTime(at),
        source: node(t, src),
        dest: node(t, dst),
        class_index: 0,
        length: len,
    }
}

pub fn fault(t: &Topology, a: &str, b: &str, fail_at: u64, repair_at: Option<u64>) -> FaultSpec {
    FaultSpec {
        link: link(t, a, b),
        fail_at: SimTime(fail_at),
        repair_at: repair_at.map(SimTime),
    }
}

/// Figure 1 with Poisson load from N1 to N10 plus cross traffic. Traffic
/// stops well before the horizon so every burst finishes.
pub fn figure1_loaded(seed: u64, horizon_us: u64) -> Scenario {
    let t = figure1();
    let mut sc = Scenario::new(t.clone());
    sc.traffic.streams = vec![
        stream(&t, "N1", "N10", 0, 40_000.0),
        stream(&t, "N7", "N10", 0, 10_000.0),
        stream(&t, "N2", "N9", 0, 10_000.0),
    ];
    sc.traffic.seed = seed;
    sc.horizon = SimTime(horizon_us);
    sc.traffic_until = SimTime(horizon_us.saturating_sub(3_000));
    sc
}

/// Random connected graph: a random spanning tree plus extra edges, with
/// integer weights in 1..=9.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize) -> Topology {
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        pairs.insert((j, i));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let links: Vec<LinkSpec> = pairs
        .into_iter()
        .map(|(a, b)| LinkSpec::new(&names[a], &names[b], rng.random_range(1..=9) as f64))
        .collect();
    Topology::build(&names, &links).expect("valid random graph")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
