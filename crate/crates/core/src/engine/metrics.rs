//! Run report and the counters that feed it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{BurstDataPacket, NodeId, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossReason {
    LinkFailure,
    NoBypass,
    NoRoute,
    OffsetViolation,
    Malformed,
}

impl LossReason {
    pub const ALL: [LossReason; 5] = [
        LossReason::LinkFailure,
        LossReason::NoBypass,
        LossReason::NoRoute,
        LossReason::OffsetViolation,
        LossReason::Malformed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LossReason::LinkFailure => "link-failure",
            LossReason::NoBypass => "no-bypass",
            LossReason::NoRoute => "no-route",
            LossReason::OffsetViolation => "offset-violation",
            LossReason::Malformed => "malformed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DelayStats {
    pub count: u64,
    pub mean_us: f64,
    pub p95_us: u64,
    pub max_us: u64,
}

impl DelayStats {
    fn from_samples(samples: &mut [u64]) -> Self {
        if samples.is_empty() {
            return DelayStats::default();
        }
        samples.sort_unstable();
        let n = samples.len();
        let sum: u128 = samples.iter().map(|&x| x as u128).sum();
        // Nearest-rank percentile.
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        DelayStats {
            count: n as u64,
            mean_us: sum as f64 / n as f64,
            p95_us: samples[rank - 1],
            max_us: samples[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo_bytes: u64,
    pub hi_bytes: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BurstStats {
    pub count: u64,
    pub delivered: u64,
    pub lost: u64,
    pub in_flight: u64,
    pub mean_bytes: f64,
    pub size_histogram: Vec<HistogramBin>,
    /// Coefficient of variation of the gaps between successive emissions
    /// of the same (source, destination, class) queue, pooled.
    pub inter_emission_cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkUsage {
    pub link: String,
    pub byte_hops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub link: String,
    pub fail_at_us: u64,
    pub repair_at_us: Option<u64>,
    /// First ack timeout that marked this link down.
    pub detected_at_us: Option<u64>,
    /// First delivery after the failure of a burst whose primary route
    /// crossed the failed link.
    pub first_recovered_delivery_us: Option<u64>,
    pub recovery_time_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossOfLightRecord {
    pub node: String,
    pub link: String,
    pub at_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProtocolCounters {
    pub ack_timeouts: u64,
    pub links_suspected: u64,
    pub reroutes: u64,
    pub header_drops: u64,
    pub loss_of_light: Vec<LossOfLightRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_index: usize,
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub queued: u64,
    pub in_flight: u64,
    pub packet_loss_rate: f64,
    pub delay: DelayStats,
    pub mean_assembly_delay_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: String,
    pub horizon_us: u64,
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub queued: u64,
    pub in_flight: u64,
    pub lost_by_reason: BTreeMap<String, u64>,
    pub packet_loss_rate: f64,
    pub delay: DelayStats,
    pub mean_assembly_delay_us: f64,
    pub bursts: BurstStats,
    pub total_byte_hops: u64,
    pub link_usage: Vec<LinkUsage>,
    pub faults: Vec<FaultRecord>,
    pub protocol: ProtocolCounters,
    pub classes: Vec<ClassReport>,
}

impl MetricsReport {
    /// generated = delivered + lost + queued + in_flight, overall and per class.
    pub fn is_conserved(&self) -> bool {
        let ok = |g: u64, d: u64, l: u64, q: u64, f: u64| g == d + l + q + f;
        ok(self.generated, self.delivered, self.lost, self.queued, self.in_flight)
            && self
                .classes
                .iter()
                .all(|c| ok(c.generated, c.delivered, c.lost, c.queued, c.in_flight))
    }

    pub fn lost_for(&self, reason: LossReason) -> u64 {
        self.lost_by_reason.get(reason.label()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default)]
struct ClassCounters {
    generated: u64,
    delivered: u64,
    lost: u64,
    queued: u64,
    in_flight: u64,
    delays: Vec<u64>,
    assembly_delay_sum: u128,
    assembled: u64,
}

/// Accumulates raw observations during a run.
#[derive(Debug, Clone, Default)]
pub(crate) struct Collector {
    classes: BTreeMap<usize, ClassCounters>,
    lost_by_reason: BTreeMap<LossReason, u64>,
    burst_sizes: Vec<u64>,
    bursts_delivered: u64,
    bursts_lost: u64,
    last_emission: BTreeMap<(NodeId, NodeId, usize), SimTime>,
    gaps: Vec<u64>,
    pub(crate) link_bytes: Vec<u64>,
    pub(crate) protocol: ProtocolCounters,
}

impl Collector {
    pub(crate) fn new(links: usize) -> Self {
        Collector {
            link_bytes: vec![0; links],
            ..Default::default()
        }
    }

    fn class(&mut self, c: usize) -> &mut ClassCounters {
        self.classes.entry(c).or_default()
    }

    pub(crate) fn packet_generated(&mut self, class: usize) {
        self.class(class).generated += 1;
    }

    pub(crate) fn burst_assembled(&mut self, b: &BurstDataPacket) {
        self.burst_sizes.push(b.total_bytes);
        let key = (b.source_node, b.dest_node, b.class_index);
        if let Some(prev) = self.last_emission.insert(key, b.assembled_at) {
            self.gaps.push((b.assembled_at - prev).0);
        }
        let c = self.class(b.class_index);
        for p in &b.packets {
            c.assembly_delay_sum += (b.assembled_at - p.created_at).0 as u128;
            c.assembled += 1;
        }
    }

    pub(crate) fn burst_delivered(&mut self, b: &BurstDataPacket, at: SimTime) {
        self.bursts_delivered += 1;
        let c = self.class(b.class_index);
        for p in &b.packets {
            c.delivered += 1;
            c.delays.push((at - p.created_at).0);
        }
    }

    pub(crate) fn burst_lost(&mut self, b: &BurstDataPacket, reason: LossReason) {
        self.bursts_lost += 1;
        *self.lost_by_reason.entry(reason).or_default() += b.packets.len() as u64;
        self.class(b.class_index).lost += b.packets.len() as u64;
    }

    pub(crate) fn burst_in_flight(&mut self, b: &BurstDataPacket) {
        self.class(b.class_index).in_flight += b.packets.len() as u64;
    }

    pub(crate) fn packet_queued(&mut self, class: usize) {
        self.class(class).queued += 1;
    }

    pub(crate) fn finish(
        mut self,
        mode: &str,
        horizon: SimTime,
        histogram_bin: u64,
        link_labels: Vec<String>,
        faults: Vec<FaultRecord>,
    ) -> MetricsReport {
        let mut all_delays = Vec::new();
        let mut classes = Vec::new();
        let (mut asm_sum, mut asm_n) = (0u128, 0u64);
        for (&idx, c) in self.classes.iter_mut() {
            all_delays.extend_from_slice(&c.delays);
            asm_sum += c.assembly_delay_sum;
            asm_n += c.assembled;
            classes.push(ClassReport {
                class_index: idx,
                generated: c.generated,
                delivered: c.delivered,
                lost: c.lost,
                queued: c.queued,
                in_flight: c.in_flight,
                packet_loss_rate: ratio(c.lost, c.generated),
                delay: DelayStats::from_samples(&mut c.delays),
                mean_assembly_delay_us: ratio_wide(c.assembly_delay_sum, c.assembled),
            });
        }
        let sum = |f: fn(&ClassReport) -> u64| classes.iter().map(f).sum::<u64>();
        let generated = sum(|c| c.generated);
        let lost = sum(|c| c.lost);

        let lost_by_reason = LossReason::ALL
            .iter()
            .map(|r| (r.label().to_string(), self.lost_by_reason.get(r).copied().unwrap_or(0)))
            .collect();

        let count = self.burst_sizes.len() as u64;
        let bursts = BurstStats {
            count,
            delivered: self.bursts_delivered,
            lost: self.bursts_lost,
            in_flight: count - self.bursts_delivered - self.bursts_lost,
            mean_bytes: ratio_wide(self.burst_sizes.iter().map(|&b| b as u128).sum(), count),
            size_histogram: histogram(&self.burst_sizes, histogram_bin.max(1)),
            inter_emission_cv: coefficient_of_variation(&self.gaps),
        };

        let link_usage: Vec<LinkUsage> = link_labels
            .into_iter()
            .zip(&self.link_bytes)
            .map(|(link, &byte_hops)| LinkUsage { link, byte_hops })
            .collect();

        MetricsReport {
            mode: mode.to_string(),
            horizon_us: horizon.0,
            generated,
            delivered: sum(|c| c.delivered),
            lost,
            queued: sum(|c| c.queued),
            in_flight: sum(|c| c.in_flight),
            lost_by_reason,
            packet_loss_rate: ratio(lost, generated),
            delay: DelayStats::from_samples(&mut all_delays),
            mean_assembly_delay_us: ratio_wide(asm_sum, asm_n),
            bursts,
            total_byte_hops: self.link_bytes.iter().sum(),
            link_usage,
            faults,
            protocol: self.protocol,
            classes,
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn ratio_wide(a: u128, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn histogram(sizes: &[u64], bin: u64) -> Vec<HistogramBin> {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in sizes {
        *counts.entry(s / bin).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, count)| HistogramBin {
            lo_bytes: k * bin,
            hi_bytes: (k + 1) * bin,
            count,
        })
        .collect()
}

/// Population standard deviation over mean. `None` with fewer than two
/// samples or a zero mean.
pub fn coefficient_of_variation(xs: &[u64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let mut v: Vec<u64> = (1..=100).collect();
        let s = DelayStats::from_samples(&mut v);
        assert_eq!(s.p95_us, 95);
        assert_eq!(s.max_us, 100);
        assert_eq!(s.mean_us, 50.5);
        let mut one = vec![7];
        assert_eq!(DelayStats::from_samples(&mut one).p95_us, 7);
    }

    #[test]
    fn cv_of_constant_gaps_is_zero() {
        assert_eq!(coefficient_of_variation(&[100, 100, 100]), Some(0.0));
        assert_eq!(coefficient_of_variation(&[5]), None);
        let cv = coefficient_of_variation(&[1, 3]).unwrap();
        assert!((cv - 0.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0, 999, 1000, 2500], 1000);
        let counts: Vec<(u64, u64)> = h.iter().map(|b| (b.lo_bytes, b.count)).collect();
        assert_eq!(counts, vec![(0, 2), (1000, 1), (2000, 1)]);
    }
}
