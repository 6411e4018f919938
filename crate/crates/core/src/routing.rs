//! Path computation over the usable (Up, not excluded) part of a topology.
//!
//! Two backends answer the same query: an exact label-setting search and a
//! genetic search over path-encoded chromosomes. The exact one doubles as
//! the reference the genetic search is checked against.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LinkId, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub cost: f64,
}

impl Path {
    pub fn trivial(n: NodeId) -> Path {
        Path {
            nodes: vec![n],
            cost: 0.0,
        }
    }

    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Links traversed, in order. `None` if two consecutive nodes are not
    /// adjacent.
    pub fn links(&self, topo: &Topology) -> Option<Vec<LinkId>> {
        self.nodes.windows(2).map(|w| topo.link_between(w[0], w[1])).collect()
    }

    /// True if the path is simple, uses only usable links, and its cost is
    /// the sum of the traversed weights.
    pub fn is_valid(&self, topo: &Topology, excluded: &BTreeSet<LinkId>) -> bool {
        let mut seen = BTreeSet::new();
        if self.nodes.is_empty() || !self.nodes.iter().all(|n| seen.insert(*n)) {
            return false;
        }
        let Some(links) = self.links(topo) else {
            return false;
        };
        if !links.iter().all(|l| topo.link(*l).is_up() && !excluded.contains(l)) {
            return false;
        }
        let cost: f64 = links.iter().map(|l| topo.link(*l).weight).sum();
        (cost - self.cost).abs() <= 1e-9 * cost.max(1.0)
    }

    fn better_than(&self, other: &Path) -> bool {
        self.rank_cmp(other) == Ordering::Less
    }

    fn rank_cmp(&self, other: &Path) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.nodes.cmp(&other.nodes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("no path")]
    NoPath,
    #[error("unknown node id {0}")]
    UnknownNode(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 20,
            generations: 50,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            rng_seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Vec<crate::assembly::FieldIssue> {
        use crate::assembly::FieldIssue;
        let mut issues = Vec::new();
        if self.population_size < 2 {
            issues.push(FieldIssue::new("population", "must be at least 2"));
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                issues.push(FieldIssue::new(name, "must lie in [0, 1]"));
            }
        }
        issues
    }
}

/// Which search answers routing queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Router {
    Exact,
    Genetic(GaConfig),
}

impl Router {
    pub fn route(
        &self,
        topo: &Topology,
        src: NodeId,
        dst: NodeId,
        excluded: &BTreeSet<LinkId>,
    ) -> Result<Path, RouteError> {
        match self {
            Router::Exact => exact_shortest_path_excluding(topo, src, dst, excluded),
            Router::Genetic(cfg) => ga_shortest_path_excluding(topo, src, dst, excluded, cfg),
        }
    }
}

struct View<'a> {
    topo: &'a Topology,
    excluded: &'a BTreeSet<LinkId>,
}

impl<'a> View<'a> {
    fn neighbors(&self, n: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.topo.neighbors(n).iter().filter_map(move |&(m, l)| {
            let link = self.topo.link(l);
            (link.is_up() && !self.excluded.contains(&l)).then_some((m, link.weight))
        })
    }

    fn cost(&self, nodes: &[NodeId]) -> f64 {
        nodes
            .windows(2)
            .map(|w| self.topo.link(self.topo.link_between(w[0], w[1]).expect("adjacent")).weight)
            .sum()
    }

    fn path(&self, nodes: Vec<NodeId>) -> Path {
        let cost = self.cost(&nodes);
        Path { nodes, cost }
    }
}

fn check_nodes(topo: &Topology, nodes: &[NodeId]) -> Result<(), RouteError> {
    match nodes.iter().find(|n| n.index() >= topo.node_count()) {
        Some(n) => Err(RouteError::UnknownNode(n.0)),
        None => Ok(()),
    }
}

pub fn exact_shortest_path(topo: &Topology, src: NodeId, dst: NodeId) -> Result<Path, RouteError> {
    exact_shortest_path_excluding(topo, src, dst, &BTreeSet::new())
}

#[derive(PartialEq)]
struct Label(f64, Vec<NodeId>);

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| self.1.cmp(&other.1))
    }
}

/// Minimum-cost path; among equal-cost paths the lexicographically
/// smallest node sequence wins.
pub fn exact_shortest_path_excluding(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    excluded: &BTreeSet<LinkId>,
) -> Result<Path, RouteError> {
    check_nodes(topo, &[src, dst])?;
    let view = View { topo, excluded };
    let mut settled = vec![false; topo.node_count()];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Label(0.0, vec![src])));
    while let Some(Reverse(Label(cost, nodes))) = heap.pop() {
        let u = *nodes.last().expect("labels are non-empty");
        if settled[u.index()] {
            continue;
        }
        settled[u.index()] = true;
        if u == dst {
            return Ok(Path { nodes, cost });
        }
        for (v, w) in view.neighbors(u) {
            if !settled[v.index()] {
                let mut next = nodes.clone();
                next.push(v);
                heap.push(Reverse(Label(cost + w, next)));
            }
        }
    }
    Err(RouteError::NoPath)
}

pub fn ga_shortest_path(topo: &Topology, src: NodeId, dst: NodeId, cfg: &GaConfig) -> Result<Path, RouteError> {
    ga_shortest_path_excluding(topo, src, dst, &BTreeSet::new(), cfg)
}

/// Genetic search for a short path.
///
/// Chromosomes are simple paths. The initial population comes from
/// loop-erased random walks (each walk limited to 4 steps per node; a
/// randomized depth-first search stands in when a walk runs out of steps).
/// Selection is a size-2 tournament, crossover swaps suffixes at a shared
/// intermediate node, mutation regrows a suffix from a random intermediate
/// node, and the best individual always survives.
pub fn ga_shortest_path_excluding(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    excluded: &BTreeSet<LinkId>,
    cfg: &GaConfig,
) -> Result<Path, RouteError> {
    check_nodes(topo, &[src, dst])?;
    if src == dst {
        return Ok(Path::trivial(src));
    }
    let view = View { topo, excluded };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let budget = 4 * topo.node_count();
    let pop_size = cfg.population_size.max(2);

    let mut population = Vec::with_capacity(pop_size);
    for _ in 0..pop_size {
        let nodes = match random_walk(&view, src, dst, budget, &mut rng) {
            Some(p) => p,
            None => random_dfs(&view, src, dst, &mut rng).ok_or(RouteError::NoPath)?,
        };
        population.push(view.path(nodes));
    }

    let mut best = best_of(&population).clone();
    for _ in 0..cfg.generations {
        let mut next = Vec::with_capacity(pop_size);
        next.push(best.clone());
        while next.len() < pop_size {
            let a = tournament(&population, &mut rng);
            let b = tournament(&population, &mut rng);
            let (mut c1, mut c2) = if rng.random_bool(cfg.crossover_rate) {
                crossover(&view, a, b, &mut rng)
            } else {
                (a.nodes.clone(), b.nodes.clone())
            };
            for child in [&mut c1, &mut c2] {
                if rng.random_bool(cfg.mutation_rate) {
                    mutate(&view, child, dst, budget, &mut rng);
                }
            }
            next.push(view.path(c1));
            if next.len() < pop_size {
                next.push(view.path(c2));
            }
        }
        population = next;
        let gen_best = best_of(&population);
        if gen_best.better_than(&best) {
            best = gen_best.clone();
        }
    }
    Ok(best)
}

fn best_of(population: &[Path]) -> &Path {
    population
        .iter()
        .min_by(|a, b| a.rank_cmp(b))
        .expect("population is non-empty")
}

fn tournament<'p>(population: &'p [Path], rng: &mut ChaCha8Rng) -> &'p Path {
    let a = &population[rng.random_range(0..population.len())];
    let b = &population[rng.random_range(0..population.len())];
    if b.better_than(a) {
        b
    } else {
        a
    }
}

/// Removes cycles: on revisiting a node, everything since its first visit
/// is dropped.
pub fn loop_erase(seq: impl IntoIterator<Item = NodeId>) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = Vec::new();
    for n in seq {
        if let Some(pos) = out.iter().position(|&m| m == n) {
            out.truncate(pos + 1);
        } else {
            out.push(n);
        }
    }
    out
}

fn random_walk(view: &View<'_>, from: NodeId, to: NodeId, budget: usize, rng: &mut ChaCha8Rng) -> Option<Vec<NodeId>> {
    let mut walk = vec![from];
    let mut cur = from;
    for _ in 0..budget {
        if cur == to {
            break;
        }
        let options: Vec<NodeId> = view.neighbors(cur).map(|(n, _)| n).collect();
        if options.is_empty() {
            return None;
        }
        cur = options[rng.random_range(0..options.len())];
        walk.push(cur);
    }
    (cur == to).then(|| loop_erase(walk))
}

fn random_dfs(view: &View<'_>, from: NodeId, to: NodeId, rng: &mut ChaCha8Rng) -> Option<Vec<NodeId>> {
    let mut visited = vec![false; view.topo.node_count()];
    visited[from.index()] = true;
    let mut path = vec![from];
    let mut frontier: Vec<Vec<NodeId>> = vec![shuffled_neighbors(view, from, rng)];
    while let Some(options) = frontier.last_mut() {
        let cur = *path.last().expect("path tracks frontier");
        if cur == to {
            return Some(path);
        }
        match options.pop() {
            Some(n) if !visited[n.index()] => {
                visited[n.index()] = true;
                path.push(n);
                let next = shuffled_neighbors(view, n, rng);
                frontier.push(next);
            }
            Some(_) => {}
            None => {
                frontier.pop();
                path.pop();
            }
        }
    }
    None
}

fn shuffled_neighbors(view: &View<'_>, n: NodeId, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    let mut v: Vec<NodeId> = view.neighbors(n).map(|(m, _)| m).collect();
    v.shuffle(rng);
    v
}

fn crossover(view: &View<'_>, a: &Path, b: &Path, rng: &mut ChaCha8Rng) -> (Vec<NodeId>, Vec<NodeId>) {
    let inner = |p: &Path| p.nodes[1..p.nodes.len().saturating_sub(1).max(1)].to_vec();
    let b_inner = inner(b);
    let common: Vec<NodeId> = inner(a).into_iter().filter(|n| b_inner.contains(n)).collect();
    if common.is_empty() {
        let fitter = if b.better_than(a) { b } else { a };
        return (fitter.nodes.clone(), fitter.nodes.clone());
    }
    let pivot = common[rng.random_range(0..common.len())];
    let i = a.nodes.iter().position(|&n| n == pivot).expect("pivot in a");
    let j = b.nodes.iter().position(|&n| n == pivot).expect("pivot in b");
    let c1 = loop_erase(a.nodes[..i].iter().chain(&b.nodes[j..]).copied());
    let c2 = loop_erase(b.nodes[..j].iter().chain(&a.nodes[i..]).copied());
    debug_assert!(view.cost(&c1).is_finite() && view.cost(&c2).is_finite());
    (c1, c2)
}

fn mutate(view: &View<'_>, nodes: &mut Vec<NodeId>, dst: NodeId, budget: usize, rng: &mut ChaCha8Rng) {
    if nodes.len() < 3 {
        return;
    }
    let k = rng.random_range(1..nodes.len() - 1);
    if let Some(tail) = random_walk(view, nodes[k], dst, budget, rng) {
        *nodes = loop_erase(nodes[..k].iter().copied().chain(tail));
    }
}

/// Detour from `detecting` to `rejoin` that avoids `failed` and any other
/// excluded link.
pub fn bypass_path(
    topo: &Topology,
    detecting: NodeId,
    rejoin: NodeId,
    failed: LinkId,
    excluded: &BTreeSet<LinkId>,
    router: &Router,
) -> Result<Path, RouteError> {
    let mut ex = excluded.clone();
    ex.insert(failed);
    router.route(topo, detecting, rejoin, &ex)
}

/// Shortest path sharing no link with `working`.
pub fn link_disjoint_backup(topo: &Topology, working: &Path) -> Result<Path, RouteError> {
    let excluded: BTreeSet<LinkId> = working.links(topo).ok_or(RouteError::NoPath)?.into_iter().collect();
    let (src, dst) = (working.nodes[0], *working.nodes.last().expect("non-empty"));
    exact_shortest_path_excluding(topo, src, dst, &excluded)
}

/// Every simple path from `src` to `dst` with at most `max_hops` hops over
/// Up links, in depth-first ascending-neighbor order.
pub fn enumerate_simple_paths(topo: &Topology, src: NodeId, dst: NodeId, max_hops: usize) -> Vec<Path> {
    let none = BTreeSet::new();
    let view = View { topo, excluded: &none };
    let mut out = Vec::new();
    let mut path = vec![src];
    fn go(view: &View<'_>, dst: NodeId, max_hops: usize, path: &mut Vec<NodeId>, out: &mut Vec<Path>) {
        let cur = *path.last().expect("non-empty");
        if cur == dst {
            out.push(view.path(path.clone()));
            return;
        }
        if path.len() > max_hops {
            return;
        }
        let next: Vec<NodeId> = view.neighbors(cur).map(|(n, _)| n).collect();
        for n in next {
            if !path.contains(&n) {
                path.push(n);
                go(view, dst, max_hops, path, out);
                path.pop();
            }
        }
    }
    go(&view, dst, max_hops, &mut path, &mut out);
    out
}
