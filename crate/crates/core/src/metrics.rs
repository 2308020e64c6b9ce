//! Run counters and the end-of-run report.
//!
//! Everything is derived from trace records through
//! [`MetricsCollector::observe`], so re-reading a trace reproduces the
//! report exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;
use crate::packet::PacketKind;
use crate::routing::DropReason;
use crate::trace::Record;
use crate::NodeId;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounters {
    /// Unique control packets stored, network-wide.
    pub hf_count: u64,
    /// `data_originated - data_delivered`.
    pub md_count: u64,
    pub rreq_tx: u64,
    pub rrep_tx: u64,
    pub rerr_tx: u64,
    pub proactive_tx: u64,
    pub hello_tx: u64,
    pub data_tx: u64,
    pub data_originated: u64,
    pub data_delivered: u64,
    pub control_tx_total: u64,
    /// Data drops attributed by reason; losses on the air are not attributed.
    pub drops: BTreeMap<DropReason, u64>,
    /// Written as `[node, count]` pairs: integer map keys do not survive
    /// JSON inside tagged trace records.
    #[serde(with = "pairs")]
    pub hf_per_node: BTreeMap<NodeId, u64>,
    /// Delivered end-to-end delays in microseconds, per flow, in delivery order.
    #[serde(skip)]
    pub delays: BTreeMap<u32, Vec<u64>>,
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use crate::NodeId;

    pub fn serialize<S: Serializer>(m: &BTreeMap<NodeId, u64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<NodeId, u64>, D::Error> {
        Ok(Vec::<(NodeId, u64)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pdr: f64,
    pub throughput_bps: f64,
    pub avg_delay_s: f64,
    pub jitter_s: f64,
    pub overhead_ratio: f64,
    pub counters: RunCounters,
}

/// Mean absolute difference of consecutive delays, per flow with at least
/// two deliveries, averaged across those flows; in seconds.
pub fn jitter(delays: &BTreeMap<u32, Vec<u64>>) -> f64 {
    let per_flow: Vec<f64> = delays
        .values()
        .filter(|d| d.len() >= 2)
        .map(|d| {
            let total: u64 = d.windows(2).map(|w| w[0].abs_diff(w[1])).sum();
            total as f64 / (d.len() - 1) as f64
        })
        .collect();
    if per_flow.is_empty() {
        return 0.0;
    }
    per_flow.iter().sum::<f64>() / per_flow.len() as f64 / 1e6
}

/// Derives the report from final counters.
///
/// `payload_bits` is the size of one data packet's payload.
pub fn finalize(counters: &RunCounters, duration: SimTime, payload_bits: u64) -> MetricsReport {
    let mut c = counters.clone();
    c.md_count = c.data_originated.saturating_sub(c.data_delivered);
    c.control_tx_total = c.rreq_tx + c.rrep_tx + c.rerr_tx + c.proactive_tx + c.hello_tx;
    let pdr = if c.data_originated == 0 {
        0.0
    } else {
        c.data_delivered as f64 / c.data_originated as f64
    };
    let secs = duration.as_secs_f64();
    let throughput_bps = if secs > 0.0 {
        (c.data_delivered * payload_bits) as f64 / secs
    } else {
        0.0
    };
    let total_delay: u64 = c.delays.values().flatten().sum();
    let delivered_with_delay: usize = c.delays.values().map(Vec::len).sum();
    let avg_delay_s = if delivered_with_delay == 0 {
        0.0
    } else {
        total_delay as f64 / delivered_with_delay as f64 / 1e6
    };
    MetricsReport {
        pdr,
        throughput_bps,
        avg_delay_s,
        jitter_s: jitter(&c.delays),
        overhead_ratio: c.control_tx_total as f64 / c.data_delivered.max(1) as f64,
        counters: c,
    }
}

/// Accumulates counters from trace records.
#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    counters: RunCounters,
    duration: SimTime,
    payload_bytes: u32,
}

impl MetricsCollector {
    pub fn counters(&self) -> &RunCounters {
        &self.counters
    }

    pub fn observe(&mut self, r: &Record) {
        let c = &mut self.counters;
        match r {
            Record::Header(h) => {
                self.duration = h.duration;
                self.payload_bytes = h.payload_bytes;
            }
            Record::Tx { kind, .. } => match kind {
                PacketKind::Hello => c.hello_tx += 1,
                PacketKind::Rreq => c.rreq_tx += 1,
                PacketKind::Rrep => c.rrep_tx += 1,
                PacketKind::Rerr => c.rerr_tx += 1,
                PacketKind::Proactive => c.proactive_tx += 1,
                PacketKind::Data => c.data_tx += 1,
            },
            Record::DataOriginated { .. } => c.data_originated += 1,
            Record::DataDelivered { flow, delay, .. } => {
                c.data_delivered += 1;
                c.delays.entry(*flow).or_default().push(delay.as_micros());
            }
            Record::DataDropped { reason, .. } => *c.drops.entry(*reason).or_default() += 1,
            Record::HfStore { node, .. } => {
                c.hf_count += 1;
                *c.hf_per_node.entry(*node).or_default() += 1;
            }
            _ => {}
        }
    }

    pub fn report(&self) -> MetricsReport {
        finalize(&self.counters, self.duration, u64::from(self.payload_bytes) * 8)
    }
}
