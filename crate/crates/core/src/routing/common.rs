//! Pieces both routers share: duplicate suppression, the data buffer,
//! discovery bookkeeping and the RREQ token bucket.

use std::collections::{BTreeMap, VecDeque};

use crate::kernel::SimTime;
use crate::packet::{ControlId, DataPacket};
use crate::NodeId;

/// Control-packet ids a node has stored, with their insertion times.
///
/// Entries older than `retention` are forgotten; when full, the oldest entry
/// is evicted first.
#[derive(Debug, Clone)]
pub struct SeenCache {
    retention: SimTime,
    capacity: usize,
    stored: BTreeMap<ControlId, SimTime>,
    order: VecDeque<(SimTime, ControlId)>,
}

impl SeenCache {
    pub fn new(retention: SimTime, capacity: usize) -> Self {
        SeenCache {
            retention,
            capacity: capacity.max(1),
            stored: BTreeMap::new(),
            order: VecDeque::new(),
        }
    }

    fn purge(&mut self, now: SimTime) {
        while let Some(&(at, id)) = self.order.front() {
            if at.saturating_add(self.retention) >= now && self.order.len() <= self.capacity {
                break;
            }
            self.order.pop_front();
            if self.stored.get(&id) == Some(&at) {
                self.stored.remove(&id);
            }
        }
    }

    pub fn contains(&mut self, id: ControlId, now: SimTime) -> bool {
        self.purge(now);
        self.stored.contains_key(&id)
    }

    /// Stores `id`; returns `false` if it was already present.
    pub fn insert(&mut self, id: ControlId, now: SimTime) -> bool {
        self.purge(now);
        if self.stored.contains_key(&id) {
            return false;
        }
        self.stored.insert(id, now);
        self.order.push_back((now, id));
        self.purge(now);
        true
    }

    pub fn len(&self) -> usize {
        self.stored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stored.is_empty()
    }
}

/// Data waiting at its source for a route, bounded across all destinations.
#[derive(Debug, Clone)]
pub struct DataBuffer {
    capacity: usize,
    queue: VecDeque<DataPacket>,
}

impl DataBuffer {
    pub fn new(capacity: usize) -> Self {
        DataBuffer {
            capacity: capacity.max(1),
            queue: VecDeque::new(),
        }
    }

    /// Queues `p`, returning the evicted oldest packet when full.
    pub fn push(&mut self, p: DataPacket) -> Option<DataPacket> {
        let evicted = if self.queue.len() >= self.capacity {
            self.queue.pop_front()
        } else {
            None
        };
        self.queue.push_back(p);
        evicted
    }

    /// Removes and returns every packet for `dest`, oldest first.
    pub fn take_for(&mut self, dest: NodeId) -> Vec<DataPacket> {
        let (taken, kept): (Vec<_>, Vec<_>) = self.queue.drain(..).partition(|p| p.dst == dest);
        self.queue = kept.into();
        taken
    }

    pub fn has_for(&self, dest: NodeId) -> bool {
        self.queue.iter().any(|p| p.dst == dest)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// An outstanding route discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingDiscovery {
    /// Counter of the RREQ sent by the current attempt.
    pub counter: u32,
    /// Zero for the first attempt.
    pub attempt: u32,
}

/// Wait before giving up on attempt `attempt`: binary exponential backoff.
pub fn discovery_wait(net_traversal: SimTime, attempt: u32) -> SimTime {
    net_traversal.mul(1u64 << attempt.min(16))
}

/// Integer token bucket: tokens are counted in millionths so that refill at
/// `rate` tokens per second is exact at microsecond resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBucket {
    capacity: u64,
    rate: u64,
    micro_tokens: u64,
    last: SimTime,
}

const MICRO: u64 = 1_000_000;

impl TokenBucket {
    /// A full bucket holding `capacity` tokens, refilled at `rate` per second.
    pub fn new(capacity: u32, rate: u32, now: SimTime) -> Self {
        TokenBucket {
            capacity: u64::from(capacity) * MICRO,
            rate: u64::from(rate),
            micro_tokens: u64::from(capacity) * MICRO,
            last: now,
        }
    }

    fn refill(&mut self, now: SimTime) {
        let elapsed = now.saturating_sub(self.last).as_micros();
        // `rate` tokens per second is `rate` micro-tokens per microsecond.
        self.micro_tokens = self
            .micro_tokens
            .saturating_add(elapsed.saturating_mul(self.rate))
            .min(self.capacity);
        self.last = now.max(self.last);
    }

    /// Takes one token if available.
    pub fn try_take(&mut self, now: SimTime) -> bool {
        self.refill(now);
        if self.micro_tokens >= MICRO {
            self.micro_tokens -= MICRO;
            true
        } else {
            false
        }
    }

    /// Whole tokens currently available.
    pub fn available(&mut self, now: SimTime) -> u64 {
        self.refill(now);
        self.micro_tokens / MICRO
    }
}

/// Checks `count(t_i..=t_j) <= capacity + rate * (t_j - t_i)` for every pair
/// of events in `times` (sorted ascending), exactly, in integer arithmetic.
///
/// Returns the first violating pair of indices.
pub fn check_rate_bound(times: &[SimTime], capacity: u32, rate: u32) -> Option<(usize, usize)> {
    let cap = u128::from(capacity) * u128::from(MICRO);
    for i in 0..times.len() {
        for j in i..times.len() {
            let count = (j - i + 1) as u128 * u128::from(MICRO);
            let span = u128::from(times[j].saturating_sub(times[i]).as_micros());
            if count > cap + span * u128::from(rate) {
                return Some((i, j));
            }
        }
    }
    None
}
