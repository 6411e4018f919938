//! Brute-force assembly interpreter. It walks time one microsecond at a
//! time and applies the rules literally, sharing no code with the
//! library's assemblers.
//!
//! Per tick: every non-empty queue whose first packet has waited exactly
//! its period is emitted (queues visited in (class, destination) order),
//! then the packets arriving at that tick are applied in input order.
//! An arrival that would push a queue past its size threshold first
//! flushes the queue; a packet larger than the threshold leaves alone.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    pub id: u64,
    pub at: u64,
    pub class: usize,
    pub dest: u32,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rules {
    Fap { period: u64 },
    Fas { size: u64 },
    Msmap { size: u64, period: u64 },
    Aas { q_min: u64, q_max: u64, width: u64, delta: u64, max_period: u64 },
    Priority { l_max: Vec<u64>, t_max: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Burst {
    pub at: u64,
    pub class: usize,
    pub dest: u32,
    pub ids: Vec<u64>,
}

#[derive(Default)]
struct Queue {
    ids: Vec<u64>,
    bytes: u64,
    first_at: u64,
    q_low: Option<u64>,
}

impl Rules {
    fn period(&self, class: usize) -> Option<u64> {
        match self {
            Rules::Fap { period } | Rules::Msmap { period, .. } => Some(*period),
            Rules::Fas { .. } => None,
            Rules::Aas { max_period, .. } => Some(*max_period),
            Rules::Priority { t_max, .. } => Some(t_max[class]),
        }
    }

    fn size(&self, class: usize, q: &Queue) -> Option<u64> {
        match self {
            Rules::Fap { .. } => None,
            Rules::Fas { size } | Rules::Msmap { size, .. } => Some(*size),
            Rules::Aas { q_min, width, .. } => Some(q.q_low.unwrap_or(*q_min) + width),
            Rules::Priority { l_max, .. } => Some(l_max[class]),
        }
    }

    fn longest_period(&self) -> u64 {
        match self {
            Rules::Priority { t_max, .. } => t_max.iter().copied().max().unwrap_or(0),
            r => r.period(0).unwrap_or(0),
        }
    }

    /// Window bookkeeping after an emission of `bytes`.
    fn after_emit(&self, q: &mut Queue, bytes: u64) {
        if let Rules::Aas { q_min, q_max, width, delta, .. } = *self {
            let low = q.q_low.unwrap_or(q_min);
            let high = low + width;
            let mut next = low;
            if bytes >= high {
                next = low + delta;
                if next + width > q_max {
                    next = q_max - width;
                }
            } else if bytes <= low {
                next = if low >= q_min + delta { low - delta } else { q_min };
            }
            q.q_low = Some(next);
        }
    }
}

fn flush(rules: &Rules, key: (usize, u32), q: &mut Queue, at: u64, out: &mut Vec<Burst>) {
    let ids = std::mem::take(&mut q.ids);
    let bytes = std::mem::replace(&mut q.bytes, 0);
    out.push(Burst {
        at,
        class: key.0,
        dest: key.1,
        ids,
    });
    rules.after_emit(q, bytes);
}

/// Every burst emitted for `arrivals` (sorted by time), including those
/// that time out after the last arrival.
pub fn assemble(rules: &Rules, arrivals: &[Arrival]) -> Vec<Burst> {
    let mut queues: BTreeMap<(usize, u32), Queue> = BTreeMap::new();
    let mut out = Vec::new();
    let Some(last) = arrivals.last() else {
        return out;
    };
    let end = last.at + rules.longest_period() + 1;
    let mut next = 0;
    for t in 0..=end {
        for (&key, q) in queues.iter_mut() {
            if let Some(p) = rules.period(key.0) {
                if !q.ids.is_empty() && t - q.first_at == p {
                    flush(rules, key, q, t, &mut out);
                }
            }
        }
        while next < arrivals.len() && arrivals[next].at == t {
            let a = arrivals[next];
            next += 1;
            let key = (a.class, a.dest);
            let q = queues.entry(key).or_default();
            if let Some(limit) = rules.size(a.class, q) {
                if !q.ids.is_empty() && q.bytes + a.len > limit {
                    flush(rules, key, q, t, &mut out);
                }
                if q.ids.is_empty() && a.len > rules.size(a.class, q).expect("sized rule") {
                    q.ids.push(a.id);
                    q.bytes = a.len;
                    flush(rules, key, q, t, &mut out);
                    continue;
                }
            }
            if q.ids.is_empty() {
                q.first_at = t;
            }
            q.ids.push(a.id);
            q.bytes += a.len;
        }
    }
    out
}
