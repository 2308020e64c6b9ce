//! Routing protocols: baseline AODV and the hybrid secure protocol (HSRP).
//!
//! Routers are per-node state machines. They never touch the channel or the
//! clock directly: every handler receives a [`Ctx`] and pushes [`Output`]s
//! (transmissions, deliveries, timers, trace records) that the engine
//! executes after the handler returns.

pub mod aodv;
pub mod common;
pub mod hsrp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crypto::KeyCenter;
use crate::kernel::{secs, RandomStream, SimTime};
use crate::packet::{DataPacket, Hello, Packet};
use crate::trace::Record;
use crate::trust::Weights;
use crate::NodeId;

pub use aodv::AodvRouter;
pub use hsrp::HsrpRouter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Aodv,
    Hsrp,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Aodv => "aodv",
            Protocol::Hsrp => "hsrp",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "hsrp" => Ok(Protocol::Hsrp),
            other => Err(format!("unknown protocol {other:?} (expected aodv or hsrp)")),
        }
    }
}

/// Why a packet was not processed further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Duplicate,
    Ttl,
    NoRoute,
    NoReverseRoute,
    NoTrustedRoute,
    Worse,
    BadSignature,
    Malformed,
    Unsigned,
    Untrusted,
    RateLimited,
    ImplausibleSeq,
    BufferOverflow,
    DiscoveryFailed,
    HopLimit,
    Swallowed,
}

/// Timers a router asks the engine to fire later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timer {
    /// Discovery attempt for `dest` whose RREQ used `counter` timed out.
    Discovery { dest: NodeId, counter: u32 },
    Proactive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// `to: None` is a one-hop broadcast.
    Send { to: Option<NodeId>, packet: Packet },
    Deliver(DataPacket),
    DropData { packet: DataPacket, reason: DropReason },
    Timer { after: SimTime, timer: Timer },
    Record(Record),
}

/// Everything a router may use while handling one event.
pub struct Ctx<'a> {
    pub now: SimTime,
    pub me: NodeId,
    /// Neighbors heard recently, with the time they were last heard.
    pub neighbors: &'a BTreeMap<NodeId, SimTime>,
    pub keys: &'a KeyCenter,
    pub rng: &'a mut RandomStream,
    pub out: &'a mut Vec<Output>,
}

impl Ctx<'_> {
    pub fn broadcast(&mut self, packet: Packet) {
        self.out.push(Output::Send { to: None, packet });
    }

    pub fn unicast(&mut self, to: NodeId, packet: Packet) {
        self.out.push(Output::Send { to: Some(to), packet });
    }

    pub fn record(&mut self, r: Record) {
        self.out.push(Output::Record(r));
    }

    pub fn timer(&mut self, after: SimTime, timer: Timer) {
        self.out.push(Output::Timer { after, timer });
    }

    pub fn drop_data(&mut self, packet: DataPacket, reason: DropReason) {
        self.out.push(Output::DropData { packet, reason });
    }

    pub fn is_neighbor(&self, n: NodeId) -> bool {
        self.neighbors.contains_key(&n)
    }
}

/// AODV constants; HSRP uses them for its reactive phase too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AodvConfig {
    #[serde(with = "secs")]
    pub active_route_lifetime: SimTime,
    /// Lifetime a destination grants in its own replies.
    #[serde(with = "secs")]
    pub my_route_timeout: SimTime,
    pub ttl: u32,
    #[serde(with = "secs")]
    pub net_traversal_time: SimTime,
    pub rreq_retries: u32,
    #[serde(with = "secs")]
    pub hello_interval: SimTime,
    pub allowed_hello_loss: u32,
    pub buffer_capacity: usize,
    #[serde(with = "secs")]
    pub seen_retention: SimTime,
    pub seen_capacity: usize,
}

impl Default for AodvConfig {
    fn default() -> Self {
        AodvConfig {
            active_route_lifetime: SimTime::from_secs(10),
            my_route_timeout: SimTime::from_secs(20),
            ttl: 35,
            net_traversal_time: SimTime::from_millis(2_800),
            rreq_retries: 2,
            hello_interval: SimTime::from_secs(1),
            allowed_hello_loss: 3,
            buffer_capacity: 64,
            seen_retention: SimTime::from_secs(10),
            seen_capacity: 4096,
        }
    }
}

impl AodvConfig {
    /// Silence after which a neighbor is declared gone.
    pub fn neighbor_timeout(&self) -> SimTime {
        self.hello_interval.mul(u64::from(self.allowed_hello_loss))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.ttl == 0 {
            return Err("aodv.ttl must be at least 1".into());
        }
        if self.hello_interval == SimTime::ZERO || self.allowed_hello_loss == 0 {
            return Err("aodv.hello_interval and aodv.allowed_hello_loss must be positive".into());
        }
        if self.net_traversal_time == SimTime::ZERO || self.active_route_lifetime == SimTime::ZERO {
            return Err("aodv.net_traversal_time and aodv.active_route_lifetime must be positive".into());
        }
        if self.buffer_capacity == 0 || self.seen_capacity == 0 {
            return Err("aodv.buffer_capacity and aodv.seen_capacity must be positive".into());
        }
        Ok(())
    }
}

/// HSRP constants layered on top of [`AodvConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsrpConfig {
    /// Maximum disjoint paths per destination.
    pub k_paths: usize,
    #[serde(with = "secs")]
    pub maintenance_interval: SimTime,
    /// Largest believable jump in a destination sequence number.
    pub delta_max: u32,
    #[serde(with = "secs")]
    pub watchdog_deadline: SimTime,
    /// Token-bucket burst size per RREQ originator.
    pub bucket_capacity: u32,
    /// Token-bucket refill rate, RREQs per second.
    pub bucket_rate: u32,
    /// Accept unsigned AODV control packets.
    pub allow_insecure_fallback: bool,
    pub weights: Weights,
    pub report_window: usize,
    /// Bypasses per window at which a link is labelled weak.
    pub bypass_threshold: usize,
    #[serde(with = "secs")]
    pub bypass_window: SimTime,
    /// Reports piggybacked on one HELLO.
    pub max_reports_per_hello: usize,
}

impl Default for HsrpConfig {
    fn default() -> Self {
        HsrpConfig {
            k_paths: 3,
            maintenance_interval: SimTime::from_secs(2),
            delta_max: 50,
            watchdog_deadline: SimTime::from_millis(500),
            bucket_capacity: 10,
            bucket_rate: 10,
            allow_insecure_fallback: false,
            weights: Weights::default(),
            report_window: 20,
            bypass_threshold: 5,
            bypass_window: SimTime::from_secs(10),
            max_reports_per_hello: 16,
        }
    }
}

impl HsrpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_paths == 0 {
            return Err("hsrp.k_paths must be at least 1".into());
        }
        if self.maintenance_interval == SimTime::ZERO || self.watchdog_deadline == SimTime::ZERO {
            return Err("hsrp.maintenance_interval and hsrp.watchdog_deadline must be positive".into());
        }
        if self.bucket_capacity == 0 {
            return Err("hsrp.bucket_capacity must be at least 1".into());
        }
        if self.report_window == 0 {
            return Err("hsrp.report_window must be at least 1".into());
        }
        self.weights.validate().map_err(|e| format!("hsrp.weights: {e}"))
    }
}

/// The best usable route a node holds for a destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteView {
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq: u32,
    pub expires_at: SimTime,
}

/// One node's router, whichever protocol it runs.
#[derive(Debug)]
pub enum Router {
    Aodv(AodvRouter),
    Hsrp(Box<HsrpRouter>),
}

impl Router {
    pub fn protocol(&self) -> Protocol {
        match self {
            Router::Aodv(_) => Protocol::Aodv,
            Router::Hsrp(_) => Protocol::Hsrp,
        }
    }

    pub fn start(&mut self, cx: &mut Ctx) {
        if let Router::Hsrp(r) = self {
            r.start(cx);
        }
    }

    pub fn handle(&mut self, cx: &mut Ctx, packet: &Packet, from: NodeId) {
        match self {
            Router::Aodv(r) => r.handle(cx, packet, from),
            Router::Hsrp(r) => r.handle(cx, packet, from),
        }
    }

    pub fn originate_data(&mut self, cx: &mut Ctx, packet: DataPacket) {
        match self {
            Router::Aodv(r) => {
                r.forward_data(cx, packet);
            }
            Router::Hsrp(r) => {
                r.forward_data(cx, packet);
            }
        }
    }

    /// Starts a route discovery without any data waiting for it.
    pub fn discover(&mut self, cx: &mut Ctx, dest: NodeId) -> Result<(), crate::error::RouteError> {
        match self {
            Router::Aodv(r) => r.originate_rreq(cx, dest),
            Router::Hsrp(r) => r.hsrp_discover(cx, dest),
        }
    }

    pub fn on_timer(&mut self, cx: &mut Ctx, timer: Timer) {
        match self {
            Router::Aodv(r) => r.on_timer(cx, timer),
            Router::Hsrp(r) => r.on_timer(cx, timer),
        }
    }

    pub fn link_break(&mut self, cx: &mut Ctx, neighbor: NodeId) {
        match self {
            Router::Aodv(r) => {
                r.handle_link_break(cx, neighbor);
            }
            Router::Hsrp(r) => {
                r.handle_link_break(cx, neighbor);
            }
        }
    }

    pub fn hello(&mut self, cx: &mut Ctx) -> Hello {
        match self {
            Router::Aodv(_) => Hello::default(),
            Router::Hsrp(r) => r.hello(cx),
        }
    }

    pub fn best_route(&self, dest: NodeId, now: SimTime) -> Option<RouteView> {
        match self {
            Router::Aodv(r) => r.best_route(dest, now),
            Router::Hsrp(r) => r.best_route(dest, now),
        }
    }

    /// Highest sequence number this node has accepted for `dest`.
    pub fn known_seq(&self, dest: NodeId) -> Option<u32> {
        match self {
            Router::Aodv(r) => r.route(dest).map(|e| e.dest_seq),
            Router::Hsrp(r) => r.known_seq(dest),
        }
    }

    pub fn as_hsrp(&self) -> Option<&HsrpRouter> {
        match self {
            Router::Hsrp(r) => Some(r),
            Router::Aodv(_) => None,
        }
    }

    pub fn as_hsrp_mut(&mut self) -> Option<&mut HsrpRouter> {
        match self {
            Router::Hsrp(r) => Some(r),
            Router::Aodv(_) => None,
        }
    }
}
