//! Lossy broadcast channel with disk range and jamming regions.

use serde::{Deserialize, Serialize};

use crate::kernel::{RandomStream, SimTime};
use crate::mobility::{in_range, Position};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamRegion {
    pub center: Position,
    pub radius: f64,
}

impl JamRegion {
    pub fn covers(&self, p: &Position) -> bool {
        self.center.distance(p) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Transmission range in meters.
    pub range: f64,
    pub loss_probability: f64,
    pub base_delay: SimTime,
    /// Upper bound of the uniform per-hop jitter.
    pub jitter: SimTime,
    pub jam_regions: Vec<JamRegion>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            range: 250.0,
            loss_probability: 0.0,
            base_delay: SimTime::from_millis(2),
            jitter: SimTime::from_millis(1),
            jam_regions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReason {
    Random,
    Jammed,
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    Delivered { at: SimTime },
    Lost(LossReason),
}

impl Reception {
    pub fn is_delivered(&self) -> bool {
        matches!(self, Reception::Delivered { .. })
    }
}

/// Decides, per candidate receiver, whether and when a frame arrives.
///
/// `active_jams` masks `cfg.jam_regions` (a region attributed to an inactive
/// jammer does not block). Jamming is checked before the loss draw, so a
/// jammed receiver consumes no randomness and never receives.
pub fn transmit(
    cfg: &ChannelConfig,
    now: SimTime,
    sender: Position,
    receivers: &[(NodeId, Position)],
    active_jams: &[bool],
    stream: &mut RandomStream,
) -> Vec<(NodeId, Reception)> {
    receivers
        .iter()
        .map(|&(id, pos)| {
            if !in_range(&sender, &pos, cfg.range) {
                return (id, Reception::Lost(LossReason::OutOfRange));
            }
            let jammed = cfg
                .jam_regions
                .iter()
                .enumerate()
                .any(|(i, r)| active_jams.get(i).copied().unwrap_or(true) && r.covers(&pos));
            if jammed {
                return (id, Reception::Lost(LossReason::Jammed));
            }
            if cfg.loss_probability > 0.0 && stream.unit() < cfg.loss_probability {
                return (id, Reception::Lost(LossReason::Random));
            }
            let jitter = if cfg.jitter.as_micros() > 0 {
                SimTime(stream.below(cfg.jitter.as_micros() + 1))
            } else {
                SimTime::ZERO
            };
            (
                id,
                Reception::Delivered {
                    at: now + cfg.base_delay + jitter,
                },
            )
        })
        .collect()
}
