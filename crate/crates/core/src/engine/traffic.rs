//! Poisson packet sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::assembly::FieldIssue;
use crate::model::{NodeId, SimTime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LengthDist {
    Fixed(u64),
    /// Inclusive on both ends.
    Uniform { min: u64, max: u64 },
}

impl LengthDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            LengthDist::Fixed(n) => n,
            LengthDist::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub source: NodeId,
    pub dest: NodeId,
    pub class_index: usize,
    /// Mean arrival rate in packets per second.
    pub rate_pps: f64,
    pub length: LengthDist,
}

/// A single packet injected at a fixed time, for reproducible scripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPacket {
    pub at: SimTime,
    pub source: NodeId,
    pub dest: NodeId,
    pub class_index: usize,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub streams: Vec<StreamConfig>,
    pub scripted: Vec<ScriptedPacket>,
    pub seed: u64,
}

impl TrafficConfig {
    pub fn validate(&self) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        for (i, s) in self.streams.iter().enumerate() {
            if !s.rate_pps.is_finite() || s.rate_pps <= 0.0 {
                issues.push(FieldIssue::new(format!("traffic[{i}].rate_pps"), "must be positive"));
            }
            if s.source == s.dest {
                issues.push(FieldIssue::new(format!("traffic[{i}].dest"), "must differ from source"));
            }
            match s.length {
                LengthDist::Fixed(0) => {
                    issues.push(FieldIssue::new(format!("traffic[{i}].length"), "must be positive"))
                }
                LengthDist::Uniform { min, max } if min == 0 || min > max => issues.push(FieldIssue::new(
                    format!("traffic[{i}].length"),
                    "uniform bounds need 0 < min <= max",
                )),
                _ => {}
            }
        }
        for (i, p) in self.scripted.iter().enumerate() {
            if p.source == p.dest {
                issues.push(FieldIssue::new(format!("packets[{i}].dest"), "must differ from source"));
            }
            if p.length == 0 {
                issues.push(FieldIssue::new(format!("packets[{i}].length"), "must be positive"));
            }
        }
        issues
    }
}

/// Endless arrival sequence of one stream. Each stream draws from its own
/// ChaCha substream of the shared seed, so adding a stream never perturbs
/// the others.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    rng: ChaCha8Rng,
    gap: Exp<f64>,
    clock_us: f64,
    length: LengthDist,
}

impl StreamGenerator {
    pub fn new(cfg: &StreamConfig, seed: u64, stream_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index as u64);
        StreamGenerator {
            rng,
            gap: Exp::new(cfg.rate_pps / 1e6).expect("rate validated positive"),
            clock_us: 0.0,
            length: cfg.length.clone(),
        }
    }
}

impl Iterator for StreamGenerator {
    type Item = (SimTime, u64);

    fn next(&mut self) -> Option<(SimTime, u64)> {
        self.clock_us += self.gap.sample(&mut self.rng);
        let len = self.length.sample(&mut self.rng);
        Some((SimTime(self.clock_us.floor() as u64), len))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Arrival {
    pub at: SimTime,
    pub stream: usize,
    pub length: u64,
}

/// All arrivals strictly before `until`, ordered by time then stream.
pub fn generate_traffic(cfg: &TrafficConfig, until: SimTime) -> Vec<Arrival> {
    let mut out: Vec<Arrival> = cfg
        .streams
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            StreamGenerator::new(s, cfg.seed, i)
                .take_while(move |&(t, _)| t < until)
                .map(move |(at, length)| Arrival { at, stream: i, length })
        })
        .collect();
    out.sort_by_key(|a| (a.at, a.stream));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(rate: f64) -> StreamConfig {
        StreamConfig {
            source: NodeId(0),
            dest: NodeId(1),
            class_index: 0,
            rate_pps: rate,
            length: LengthDist::Uniform { min: 100, max: 1500 },
        }
    }

    #[test]
    fn count_is_poisson_plausible() {
        // 10_000 pps over 100 ms: mean 1000, sigma ~31.6.
        let cfg = TrafficConfig {
            streams: vec![stream(10_000.0)],
            seed: 42,
            ..Default::default()
        };
        let n = generate_traffic(&cfg, SimTime(100_000)).len() as f64;
        assert!((n - 1000.0).abs() <= 4.0 * 1000f64.sqrt(), "count {n}");
    }

    #[test]
    fn streams_are_independent() {
        let one = TrafficConfig {
            streams: vec![stream(5_000.0)],
            seed: 7,
            ..Default::default()
        };
        let two = TrafficConfig {
            streams: vec![stream(5_000.0), stream(9_000.0)],
            seed: 7,
            ..Default::default()
        };
        let a = generate_traffic(&one, SimTime(50_000));
        let b: Vec<Arrival> = generate_traffic(&two, SimTime(50_000))
            .into_iter()
            .filter(|x| x.stream == 0)
            .collect();
        assert_eq!(a, b);
        let c: Vec<_> = generate_traffic(&two, SimTime(50_000))
            .into_iter()
            .filter(|x| x.stream == 1)
            .map(|x| x.at)
            .collect();
        assert_ne!(a.iter().map(|x| x.at).collect::<Vec<_>>(), c);
    }

    #[test]
    fn empty_horizon() {
        let cfg = TrafficConfig {
            streams: vec![stream(1e6)],
            seed: 1,
            ..Default::default()
        };
        assert!(generate_traffic(&cfg, SimTime(0)).is_empty());
    }

    #[test]
    fn reproducible_and_sorted() {
        let cfg = TrafficConfig {
            streams: vec![stream(20_000.0), stream(3_000.0)],
            seed: 99,
            ..Default::default()
        };
        let a = generate_traffic(&cfg, SimTime(20_000));
        assert_eq!(a, generate_traffic(&cfg, SimTime(20_000)));
        assert!(a.windows(2).all(|w| (w[0].at, w[0].stream) <= (w[1].at, w[1].stream)));
        assert!(a.iter().all(|x| (100..=1500).contains(&x.length)));
    }

    #[test]
    fn validation() {
        let mut s = stream(0.0);
        s.dest = s.source;
        s.length = LengthDist::Uniform { min: 10, max: 5 };
        let cfg = TrafficConfig {
            streams: vec![s],
            seed: 0,
            ..Default::default()
        };
        assert_eq!(cfg.validate().len(), 3);
    }
}
