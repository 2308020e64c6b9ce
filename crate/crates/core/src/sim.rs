//! The simulation engine: nodes, channel, mobility, traffic, attackers and
//! the watchdog, driven by one event queue.
//!
//! Randomness comes from named streams forked from the master seed:
//! `keys`, `mobility`, `attackers`, `traffic`, `channel`, `hello`,
//! `node-{i}` and `flooder-{i}`. Attacker placement is drawn even when
//! attacks are switched off, so attack/no-attack runs share topology and flows.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use crate::adversary::{Adversary, AttackKind, AttackProfile, Behavior, FloodTarget};
use crate::channel::{self, ChannelConfig, JamRegion, LossReason, Reception};
use crate::crypto::{KeyCenter, KeyPairRecord};
use crate::error::{CryptoError, SimError};
use crate::kernel::{fork_stream, EventQueue, RandomStream, SimTime};
use crate::metrics::{MetricsCollector, MetricsReport};
use crate::mobility::{self, Area, MobilityState, Position, WaypointParams};
use crate::packet::{DataPacket, Packet, PacketKind};
use crate::routing::{AodvConfig, AodvRouter, Ctx, HsrpConfig, HsrpRouter, Output, Protocol, Router, Timer};
use crate::trace::{AttackerInfo, Header, Record, TraceWriter, WatchOutcome, TRACE_VERSION};
use crate::trust::Outcome;
use crate::NodeId;

/// Issues every node's key pair from the run's `keys` stream.
pub fn provision_keys(seed: u64, nodes: usize) -> Result<(KeyCenter, Vec<KeyPairRecord>), CryptoError> {
    let mut kc = KeyCenter::new();
    let mut stream = fork_stream(seed, b"keys");
    let pairs = (0..nodes)
        .map(|i| kc.keygen(NodeId(i as u32), &mut stream))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((kc, pairs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause: SimTime,
    /// Position update period.
    pub step: SimTime,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            speed_min: 0.0,
            speed_max: 10.0,
            pause: SimTime::ZERO,
            step: SimTime::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    /// Random flows between honest pairs, used when `explicit` is empty.
    pub flows: usize,
    pub packet_bytes: u32,
    /// Constant-bit-rate packets per second per flow.
    pub rate_pps: f64,
    pub start: SimTime,
    /// Quiet time before the end so in-flight packets can arrive.
    pub drain: SimTime,
    pub explicit: Vec<(NodeId, NodeId)>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            flows: 10,
            packet_bytes: 512,
            rate_pps: 2.5,
            start: SimTime::from_secs(2),
            drain: SimTime::from_secs(5),
            explicit: Vec::new(),
        }
    }
}

/// Who attacks and how, when attacks are enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSetup {
    /// Kind of the randomly placed attackers.
    pub kind: AttackKind,
    /// Total attackers, explicit ones included.
    pub count: usize,
    pub explicit: Vec<(NodeId, AttackKind)>,
    pub active_from: SimTime,
    pub active_until: SimTime,
    pub inflation: u32,
    pub masquerade: bool,
    pub drop_fraction: f64,
    pub flood_rate: f64,
    pub flood_target: FloodTarget,
    /// Radius of the jamming disk placed at each jammer's starting position.
    pub jam_radius: f64,
}

impl Default for AttackSetup {
    fn default() -> Self {
        AttackSetup {
            kind: AttackKind::Blackhole,
            count: 5,
            explicit: Vec::new(),
            active_from: SimTime::ZERO,
            active_until: SimTime::MAX,
            inflation: 10_000,
            masquerade: false,
            drop_fraction: 0.5,
            flood_rate: 20.0,
            flood_target: FloodTarget::Nonexistent,
            jam_radius: 100.0,
        }
    }
}

impl AttackSetup {
    fn profile(&self, kind: AttackKind, region: usize) -> AttackProfile {
        let behavior = match kind {
            AttackKind::Blackhole => Behavior::Blackhole {
                inflation: self.inflation,
                masquerade: self.masquerade,
            },
            AttackKind::Sinkhole => Behavior::Sinkhole {
                drop_fraction: self.drop_fraction,
            },
            AttackKind::Flooder => Behavior::Flooder {
                rate: self.flood_rate,
                target: self.flood_target,
            },
            AttackKind::Jammer => Behavior::Jammer { region },
        };
        AttackProfile {
            behavior,
            active_from: self.active_from,
            active_until: self.active_until,
        }
    }
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: String,
    pub seed: u64,
    pub nodes: usize,
    pub duration: SimTime,
    pub protocol: Protocol,
    pub area: Area,
    pub mobility: MobilityConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    /// Attacker placement; `None` means the scenario has no attackers.
    pub attacks: Option<AttackSetup>,
    /// Whether placed attackers actually misbehave.
    pub attack_on: bool,
    pub aodv: AodvConfig,
    pub hsrp: HsrpConfig,
    /// Trust snapshot period; zero disables snapshots.
    pub trust_snapshot: SimTime,
    /// Fixed initial positions, overriding random placement.
    pub positions: Option<Vec<Position>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario: "default".into(),
            seed: 0,
            nodes: 50,
            duration: SimTime::from_secs(100),
            protocol: Protocol::Aodv,
            area: Area {
                width: 700.0,
                height: 700.0,
            },
            mobility: MobilityConfig::default(),
            channel: ChannelConfig::default(),
            traffic: TrafficConfig::default(),
            attacks: None,
            attack_on: false,
            aodv: AodvConfig::default(),
            hsrp: HsrpConfig::default(),
            trust_snapshot: SimTime::from_secs(10),
            positions: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.nodes < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.nodes));
        }
        if self.duration == SimTime::ZERO {
            return bad("duration must be positive".into());
        }
        if let Some(p) = &self.positions {
            if p.len() != self.nodes {
                return bad(format!("{} fixed positions for {} nodes", p.len(), self.nodes));
            }
        }
        if !(self.area.width > 0.0 && self.area.height > 0.0) {
            return bad("area must have positive width and height".into());
        }
        if self.mobility.speed_min < 0.0 || self.mobility.speed_max < self.mobility.speed_min {
            return bad("mobility speeds must satisfy 0 <= speed_min <= speed_max".into());
        }
        if self.mobility.speed_max > 0.0 && self.mobility.step == SimTime::ZERO {
            return bad("mobility step must be positive".into());
        }
        if !(self.traffic.rate_pps > 0.0) {
            return bad("traffic rate must be positive".into());
        }
        for (s, d) in &self.traffic.explicit {
            if s == d || s.0 as usize >= self.nodes || d.0 as usize >= self.nodes {
                return bad(format!("flow {s} -> {d} is not between two distinct nodes"));
            }
        }
        if let Some(a) = &self.attacks {
            if a.count > self.nodes.saturating_sub(2) || a.explicit.len() > a.count {
                return bad(format!("{} attackers leave too few honest nodes", a.count));
            }
            if let Some((n, _)) = a.explicit.iter().find(|(n, _)| n.0 as usize >= self.nodes) {
                return bad(format!("attacker {n} is not one of {} nodes", self.nodes));
            }
            if !(0.0..=1.0).contains(&a.drop_fraction) || a.flood_rate < 0.0 {
                return bad("sinkhole drop_fraction must lie in [0, 1] and flood rate be non-negative".into());
            }
        }
        self.aodv.validate().map_err(SimError::Config)?;
        self.hsrp.validate().map_err(SimError::Config)
    }

    fn attack_label(&self) -> String {
        match (&self.attacks, self.attack_on) {
            (Some(a), true) => a.kind.to_string(),
            _ => "none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub id: u32,
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug)]
enum Action {
    Receive { to: NodeId, from: NodeId, packet: Arc<Packet> },
    Timer { node: NodeId, timer: Timer },
    Hello { node: NodeId },
    Mobility,
    Flow { flow: usize, seq: u32 },
    Flood { node: NodeId },
    WatchDeadline { watcher: NodeId, uid: u64 },
    LinkFail { node: NodeId, neighbor: NodeId },
    Snapshot,
    Discover { node: NodeId, dest: NodeId },
}

struct Node {
    router: Router,
    adversary: Option<Adversary>,
    rng: RandomStream,
    heard: BTreeMap<NodeId, SimTime>,
}

enum Sink {
    Off,
    Memory(Vec<Record>),
    Writer(TraceWriter<Box<dyn Write + Send>>),
}

pub struct Simulation {
    cfg: SimConfig,
    queue: EventQueue<Action>,
    nodes: Vec<Node>,
    mobility: Vec<MobilityState>,
    params: WaypointParams,
    keys: KeyCenter,
    channel: ChannelConfig,
    /// Attacker owning each jam region, if attributed.
    jam_owner: Vec<Option<NodeId>>,
    channel_rng: RandomStream,
    mobility_rng: RandomStream,
    flood_rngs: BTreeMap<NodeId, RandomStream>,
    attackers: Vec<(NodeId, AttackKind)>,
    header: Header,
    flows: Vec<Flow>,
    flow_interval: SimTime,
    traffic_stop: SimTime,
    next_uid: u64,
    /// Open watches per data uid: `(watcher, watched)`.
    watches: BTreeMap<u64, Vec<(NodeId, NodeId)>>,
    collector: MetricsCollector,
    sink: Sink,
    sink_error: Option<std::io::Error>,
    started: bool,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.nodes;
        let seed = cfg.seed;
        let (keys, pairs) = provision_keys(seed, n)?;

        let mut mobility_rng = fork_stream(seed, b"mobility");
        let start = match &cfg.positions {
            Some(p) => p.clone(),
            None => mobility::init_positions(n, cfg.area, &mut mobility_rng),
        };
        let params = WaypointParams {
            area: cfg.area,
            speed_min: cfg.mobility.speed_min,
            speed_max: cfg.mobility.speed_max,
            pause: cfg.mobility.pause,
        };
        let mobile = cfg.mobility.speed_max > 0.0;
        let states = start
            .iter()
            .map(|p| {
                if mobile {
                    MobilityState::start(*p, &params, &mut mobility_rng)
                } else {
                    MobilityState::fixed(*p)
                }
            })
            .collect::<Vec<_>>();

        let attackers = place_attackers(&cfg, seed);
        let attacker_set: BTreeSet<NodeId> = attackers.iter().map(|(a, _)| *a).collect();

        let mut channel = cfg.channel.clone();
        let mut jam_owner = vec![None; channel.jam_regions.len()];
        let mut jam_region_of = BTreeMap::new();
        for (a, kind) in &attackers {
            if *kind == AttackKind::Jammer {
                let radius = cfg.attacks.as_ref().map_or(100.0, |s| s.jam_radius);
                jam_region_of.insert(*a, channel.jam_regions.len());
                channel.jam_regions.push(JamRegion {
                    center: start[a.0 as usize],
                    radius,
                });
                jam_owner.push(Some(*a));
            }
        }

        let flows = choose_flows(&cfg, seed, &attacker_set);

        let mut nodes = Vec::with_capacity(n);
        for (i, pair) in pairs.iter().enumerate() {
            let id = NodeId(i as u32);
            let router = match cfg.protocol {
                Protocol::Aodv => Router::Aodv(AodvRouter::new(id, cfg.aodv.clone())),
                Protocol::Hsrp => Router::Hsrp(Box::new(HsrpRouter::new(
                    id,
                    cfg.aodv.clone(),
                    cfg.hsrp.clone(),
                    pair.private_key.clone(),
                )?)),
            };
            nodes.push(Node {
                router,
                adversary: None,
                rng: fork_stream(seed, format!("node-{i}").as_bytes()),
                heard: BTreeMap::new(),
            });
        }

        let mut header_attackers = Vec::new();
        let mut flood_rngs = BTreeMap::new();
        if cfg.attack_on {
            let setup = cfg.attacks.as_ref().expect("attackers imply a setup");
            for (a, kind) in &attackers {
                let profile = setup.profile(*kind, jam_region_of.get(a).copied().unwrap_or(0));
                header_attackers.push(AttackerInfo {
                    node: *a,
                    kind: *kind,
                    active_from: profile.active_from,
                    active_until: profile.active_until,
                });
                if *kind == AttackKind::Flooder {
                    flood_rngs.insert(*a, fork_stream(seed, format!("flooder-{}", a.0).as_bytes()));
                }
                nodes[a.0 as usize].adversary = Some(Adversary::new(
                    *a,
                    profile,
                    pairs[a.0 as usize].private_key.clone(),
                    cfg.protocol,
                    cfg.aodv.ttl,
                    cfg.aodv.my_route_timeout,
                ));
            }
        }

        let header = Header {
            version: TRACE_VERSION,
            scenario: cfg.scenario.clone(),
            protocol: cfg.protocol,
            attack: cfg.attack_label(),
            seed,
            nodes: n as u32,
            duration: cfg.duration,
            payload_bytes: cfg.traffic.packet_bytes,
            attackers: header_attackers,
        };
        let flow_interval = SimTime::from_secs_f64(1.0 / cfg.traffic.rate_pps).max(SimTime(1));
        let traffic_stop = cfg.duration.saturating_sub(cfg.traffic.drain);
        Ok(Simulation {
            queue: EventQueue::new(),
            nodes,
            mobility: states,
            params,
            keys,
            channel,
            jam_owner,
            channel_rng: fork_stream(seed, b"channel"),
            mobility_rng,
            flood_rngs,
            attackers,
            header,
            flows,
            flow_interval,
            traffic_stop,
            next_uid: 0,
            watches: BTreeMap::new(),
            collector: MetricsCollector::default(),
            sink: Sink::Off,
            sink_error: None,
            started: false,
            cfg,
        })
    }

    /// Keeps every record in memory (see [`Simulation::records`]).
    pub fn record_in_memory(&mut self) {
        self.sink = Sink::Memory(Vec::new());
    }

    /// Streams records to `out`, one JSON object per line.
    pub fn trace_to(&mut self, out: Box<dyn Write + Send>) {
        self.sink = Sink::Writer(TraceWriter::new(out));
    }

    pub fn records(&self) -> &[Record] {
        match &self.sink {
            Sink::Memory(v) => v,
            _ => &[],
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    /// Placed attackers, whether or not attacks are switched on.
    pub fn attackers(&self) -> &[(NodeId, AttackKind)] {
        &self.attackers
    }

    pub fn router(&self, node: NodeId) -> &Router {
        &self.nodes[node.0 as usize].router
    }

    pub fn keys(&self) -> &KeyCenter {
        &self.keys
    }

    pub fn positions(&self) -> Vec<Position> {
        self.mobility.iter().map(|m| m.current).collect()
    }

    pub fn counters(&self) -> &crate::metrics::RunCounters {
        self.collector.counters()
    }

    /// Asks `node` to discover a route to `dest` at time `at`.
    pub fn schedule_discovery(&mut self, node: NodeId, dest: NodeId, at: SimTime) -> Result<(), SimError> {
        self.queue.schedule(at, Action::Discover { node, dest })?;
        Ok(())
    }

    fn emit(&mut self, r: Record) {
        self.collector.observe(&r);
        match &mut self.sink {
            Sink::Off => {}
            Sink::Memory(v) => v.push(r),
            Sink::Writer(w) => {
                if self.sink_error.is_none() {
                    if let Err(e) = w.write(&r) {
                        self.sink_error = Some(e);
                    }
                }
            }
        }
    }

    /// Schedules the periodic activity and emits the header.
    ///
    /// `traffic` switches the CBR flows on; tests driving discoveries by hand
    /// leave it off.
    pub fn start(&mut self, traffic: bool) -> Result<(), SimError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        self.emit(Record::Header(self.header.clone()));
        let n = self.nodes.len();
        let mut hello_rng = fork_stream(self.cfg.seed, b"hello");
        let hello = self.cfg.aodv.hello_interval.as_micros();
        for i in 0..n {
            let offset = SimTime(hello_rng.below(hello.max(1)));
            self.queue.schedule(offset, Action::Hello { node: NodeId(i as u32) })?;
        }
        for i in 0..n {
            self.with_node(NodeId(i as u32), |router, _, cx| router.start(cx));
        }
        if self.cfg.mobility.speed_max > 0.0 {
            self.queue.schedule(self.cfg.mobility.step, Action::Mobility)?;
        }
        if traffic {
            let mut traffic_rng = fork_stream(self.cfg.seed, b"traffic-start");
            for f in 0..self.flows.len() {
                let offset = SimTime(traffic_rng.below(self.flow_interval.as_micros().max(1)));
                let at = self.cfg.traffic.start + offset;
                if at < self.traffic_stop {
                    self.queue.schedule(at, Action::Flow { flow: f, seq: 0 })?;
                }
            }
        }
        let flooders: Vec<(NodeId, f64, SimTime)> = self
            .nodes
            .iter()
            .filter_map(|node| node.adversary.as_ref())
            .filter_map(|a| a.flood_rate().map(|r| (a.me(), r, a.profile().active_from)))
            .collect();
        for (node, rate, from) in flooders {
            if rate > 0.0 {
                let gap = self.flood_gap(node, rate);
                self.queue.schedule(from.saturating_add(gap), Action::Flood { node })?;
            }
        }
        if self.cfg.protocol == Protocol::Hsrp && self.cfg.trust_snapshot > SimTime::ZERO {
            self.queue.schedule(self.cfg.trust_snapshot, Action::Snapshot)?;
        }
        Ok(())
    }

    fn flood_gap(&mut self, node: NodeId, rate: f64) -> SimTime {
        let rng = self.flood_rngs.get_mut(&node).expect("flooder stream");
        SimTime::from_secs_f64(rng.exponential(rate)).max(SimTime(1))
    }

    /// Runs to `end` (clamped to the configured duration).
    pub fn run_until(&mut self, end: SimTime) -> Result<(), SimError> {
        let end = end.min(self.cfg.duration);
        while let Some(ev) = self.queue.pop_until(end) {
            self.dispatch(ev.action)?;
        }
        match self.sink_error.take() {
            Some(e) => Err(SimError::Trace(e)),
            None => Ok(()),
        }
    }

    /// Runs the full scenario and returns its report (also the trace's last record).
    pub fn run(&mut self) -> Result<MetricsReport, SimError> {
        self.start(true)?;
        self.run_until(self.cfg.duration)?;
        self.finish()
    }

    /// Emits the end record and flushes the trace.
    pub fn finish(&mut self) -> Result<MetricsReport, SimError> {
        let report = self.collector.report();
        self.emit(Record::End {
            t: self.cfg.duration,
            report: report.clone(),
        });
        if let Sink::Writer(w) = &mut self.sink {
            w.flush()?;
        }
        match self.sink_error.take() {
            Some(e) => Err(SimError::Trace(e)),
            None => Ok(report),
        }
    }

    fn with_node<F>(&mut self, node: NodeId, f: F)
    where
        F: FnOnce(&mut Router, Option<&mut Adversary>, &mut Ctx),
    {
        let now = self.queue.now();
        let mut out = Vec::new();
        {
            let n = &mut self.nodes[node.0 as usize];
            let mut cx = Ctx {
                now,
                me: node,
                neighbors: &n.heard,
                keys: &self.keys,
                rng: &mut n.rng,
                out: &mut out,
            };
            f(&mut n.router, n.adversary.as_mut(), &mut cx);
        }
        self.apply(node, out);
    }

    fn is_honest_hsrp(&self, node: NodeId) -> bool {
        self.cfg.protocol == Protocol::Hsrp && self.nodes[node.0 as usize].adversary.is_none()
    }

    fn dispatch(&mut self, action: Action) -> Result<(), SimError> {
        let now = self.queue.now();
        match action {
            Action::Receive { to, from, packet } => {
                self.nodes[to.0 as usize].heard.insert(from, now);
                if let Packet::Data(d) = packet.as_ref() {
                    if d.dst != to && self.is_honest_hsrp(from) {
                        self.watches.entry(d.uid).or_default().push((from, to));
                        self.queue.schedule_in(
                            self.cfg.hsrp.watchdog_deadline,
                            Action::WatchDeadline { watcher: from, uid: d.uid },
                        );
                    }
                }
                self.with_node(to, |router, adversary, cx| {
                    if let Some(a) = adversary {
                        if a.intercept(cx, router, &packet, from) {
                            return;
                        }
                        let start = cx.out.len();
                        router.handle(cx, &packet, from);
                        a.rewrite(cx, start);
                    } else {
                        router.handle(cx, &packet, from);
                    }
                });
            }
            Action::Timer { node, timer } => {
                self.with_node(node, |router, _, cx| router.on_timer(cx, timer));
            }
            Action::Hello { node } => {
                let timeout = self.cfg.aodv.neighbor_timeout();
                let silent: Vec<NodeId> = self.nodes[node.0 as usize]
                    .heard
                    .iter()
                    .filter(|(_, t)| now.saturating_sub(**t) > timeout)
                    .map(|(n, _)| *n)
                    .collect();
                for dead in silent {
                    self.nodes[node.0 as usize].heard.remove(&dead);
                    self.with_node(node, |router, _, cx| router.link_break(cx, dead));
                }
                self.with_node(node, |router, _, cx| {
                    let hello = router.hello(cx);
                    cx.broadcast(Packet::Hello(hello));
                });
                self.queue.schedule_in(self.cfg.aodv.hello_interval, Action::Hello { node });
            }
            Action::Mobility => {
                let step = self.cfg.mobility.step;
                let start = now.saturating_sub(step);
                for m in self.mobility.iter_mut() {
                    *m = mobility::step_waypoint(*m, start, step, &self.params, &mut self.mobility_rng);
                }
                self.queue.schedule_in(step, Action::Mobility);
            }
            Action::Flow { flow, seq } => {
                let f = self.flows[flow];
                let p = DataPacket {
                    uid: self.next_uid,
                    flow: f.id,
                    src: f.src,
                    dst: f.dst,
                    seq,
                    sent_at: now,
                    payload_len: self.cfg.traffic.packet_bytes,
                    hops: 0,
                };
                self.next_uid += 1;
                self.emit(Record::DataOriginated {
                    t: now,
                    uid: p.uid,
                    flow: f.id,
                    src: f.src,
                    dst: f.dst,
                });
                self.with_node(f.src, |router, _, cx| router.originate_data(cx, p));
                let next = now + self.flow_interval;
                if next < self.traffic_stop {
                    self.queue.schedule(next, Action::Flow { flow, seq: seq + 1 })?;
                }
            }
            Action::Flood { node } => {
                let mut rate = 0.0;
                let mut until = SimTime::ZERO;
                self.with_node(node, |_, adversary, cx| {
                    if let Some(a) = adversary {
                        a.flood(cx);
                        rate = a.flood_rate().unwrap_or(0.0);
                        until = a.profile().active_until;
                    }
                });
                if rate > 0.0 {
                    let next = now.saturating_add(self.flood_gap(node, rate));
                    if next < until && next < self.cfg.duration {
                        self.queue.schedule(next, Action::Flood { node })?;
                    }
                }
            }
            Action::WatchDeadline { watcher, uid } => {
                let Some(list) = self.watches.get_mut(&uid) else {
                    return Ok(());
                };
                let Some(pos) = list.iter().position(|(w, _)| *w == watcher) else {
                    return Ok(());
                };
                let (_, target) = list.remove(pos);
                if list.is_empty() {
                    self.watches.remove(&uid);
                }
                self.conclude_watch(watcher, target, uid, WatchOutcome::Failure);
            }
            Action::LinkFail { node, neighbor } => {
                self.nodes[node.0 as usize].heard.remove(&neighbor);
                self.with_node(node, |router, _, cx| router.link_break(cx, neighbor));
            }
            Action::Snapshot => {
                for i in 0..self.nodes.len() {
                    if let Some(h) = self.nodes[i].router.as_hsrp_mut() {
                        for r in h.trust_snapshot(now) {
                            self.emit(r);
                        }
                    }
                }
                self.queue.schedule_in(self.cfg.trust_snapshot, Action::Snapshot);
            }
            Action::Discover { node, dest } => {
                self.with_node(node, |router, _, cx| {
                    // An existing route makes the request moot, not an error.
                    let _ = router.discover(cx, dest);
                });
            }
        }
        Ok(())
    }

    fn conclude_watch(&mut self, watcher: NodeId, target: NodeId, uid: u64, outcome: WatchOutcome) {
        self.emit(Record::Watchdog {
            t: self.queue.now(),
            watcher,
            target,
            uid,
            outcome,
        });
        let observed = match outcome {
            WatchOutcome::Success => Outcome::Success,
            WatchOutcome::Failure => Outcome::Failure,
            WatchOutcome::Excused => return,
        };
        self.with_node(watcher, |router, _, cx| {
            if let Some(h) = router.as_hsrp_mut() {
                h.observe(cx, target, observed);
            }
        });
    }

    fn apply(&mut self, node: NodeId, out: Vec<Output>) {
        let now = self.queue.now();
        for o in out {
            match o {
                Output::Send { to, packet } => self.transmit(node, to, packet),
                Output::Deliver(p) => self.emit(Record::DataDelivered {
                    t: now,
                    uid: p.uid,
                    flow: p.flow,
                    delay: now.saturating_sub(p.sent_at),
                }),
                Output::DropData { packet, reason } => self.emit(Record::DataDropped {
                    t: now,
                    node,
                    uid: packet.uid,
                    reason,
                }),
                Output::Timer { after, timer } => {
                    self.queue.schedule_in(after, Action::Timer { node, timer });
                }
                Output::Record(r) => self.emit(r),
            }
        }
    }

    fn jam_mask(&self, now: SimTime) -> Vec<bool> {
        self.jam_owner
            .iter()
            .map(|owner| match owner {
                None => true,
                Some(a) => self.nodes[a.0 as usize]
                    .adversary
                    .as_ref()
                    .is_some_and(|adv| adv.profile().is_active(now)),
            })
            .collect()
    }

    fn transmit(&mut self, sender: NodeId, to: Option<NodeId>, packet: Packet) {
        let now = self.queue.now();
        let kind = packet.kind();
        let uid = match &packet {
            Packet::Data(d) => Some(d.uid),
            _ => None,
        };
        let wire = matches!(packet, Packet::Signed(_)).then(|| hex::encode(packet.encode()));
        self.emit(Record::Tx {
            t: now,
            node: sender,
            kind,
            to,
            uid,
            wire,
        });
        let pos = self.mobility[sender.0 as usize].current;
        if let Some(uid) = uid {
            self.settle_watches(sender, uid, pos, WatchOutcome::Success);
        }
        if kind == PacketKind::Rerr {
            self.excuse_watches(sender);
        }
        let receivers: Vec<(NodeId, Position)> = match to {
            Some(t) => vec![(t, self.mobility[t.0 as usize].current)],
            None => (0..self.nodes.len())
                .filter(|i| *i != sender.0 as usize)
                .map(|i| (NodeId(i as u32), self.mobility[i].current))
                .collect(),
        };
        let mask = self.jam_mask(now);
        let outcomes = channel::transmit(&self.channel, now, pos, &receivers, &mask, &mut self.channel_rng);
        let packet = Arc::new(packet);
        for (rx, outcome) in outcomes {
            match outcome {
                Reception::Delivered { at } => {
                    self.queue
                        .schedule(
                            at,
                            Action::Receive {
                                to: rx,
                                from: sender,
                                packet: Arc::clone(&packet),
                            },
                        )
                        .expect("arrivals are never in the past");
                }
                // A unicast to a node that moved away is what a missing
                // link-layer acknowledgement would reveal.
                Reception::Lost(LossReason::OutOfRange) if to.is_some() => {
                    self.queue.schedule_in(
                        SimTime::ZERO,
                        Action::LinkFail {
                            node: sender,
                            neighbor: rx,
                        },
                    );
                }
                Reception::Lost(_) => {}
            }
        }
    }

    /// Resolves watches on `sender` for `uid` whose watcher can overhear it.
    fn settle_watches(&mut self, sender: NodeId, uid: u64, pos: Position, outcome: WatchOutcome) {
        let Some(list) = self.watches.get_mut(&uid) else {
            return;
        };
        let range = self.channel.range;
        let mobility = &self.mobility;
        let mut settled = Vec::new();
        list.retain(|(watcher, target)| {
            let hears = mobility::in_range(&mobility[watcher.0 as usize].current, &pos, range);
            if *target == sender && hears {
                settled.push(*watcher);
                false
            } else {
                true
            }
        });
        if list.is_empty() {
            self.watches.remove(&uid);
        }
        for w in settled {
            self.conclude_watch(w, sender, uid, outcome);
        }
    }

    /// A route error from `sender` explains why it stopped forwarding.
    fn excuse_watches(&mut self, sender: NodeId) {
        let mut excused = Vec::new();
        self.watches.retain(|uid, list| {
            list.retain(|(w, target)| {
                if *target == sender {
                    excused.push((*w, *uid));
                    false
                } else {
                    true
                }
            });
            !list.is_empty()
        });
        for (w, uid) in excused {
            self.conclude_watch(w, sender, uid, WatchOutcome::Excused);
        }
    }
}

/// Draws attacker placement from the `attackers` stream.
fn place_attackers(cfg: &SimConfig, seed: u64) -> Vec<(NodeId, AttackKind)> {
    let Some(setup) = &cfg.attacks else {
        return Vec::new();
    };
    let mut rng = fork_stream(seed, b"attackers");
    let mut chosen: Vec<(NodeId, AttackKind)> = setup.explicit.clone();
    let taken: BTreeSet<NodeId> = chosen.iter().map(|(n, _)| *n).collect();
    let mut pool: Vec<NodeId> = (0..cfg.nodes as u32).map(NodeId).filter(|n| !taken.contains(n)).collect();
    // Explicit flow endpoints must stay honest.
    pool.retain(|n| !cfg.traffic.explicit.iter().any(|(s, d)| s == n || d == n));
    while chosen.len() < setup.count && !pool.is_empty() {
        let i = rng.below(pool.len() as u64) as usize;
        chosen.push((pool.swap_remove(i), setup.kind));
    }
    chosen.sort();
    chosen
}

/// Explicit flows, or random distinct honest pairs from the `traffic` stream.
fn choose_flows(cfg: &SimConfig, seed: u64, attackers: &BTreeSet<NodeId>) -> Vec<Flow> {
    if !cfg.traffic.explicit.is_empty() {
        return cfg
            .traffic
            .explicit
            .iter()
            .enumerate()
            .map(|(i, (s, d))| Flow {
                id: i as u32,
                src: *s,
                dst: *d,
            })
            .collect();
    }
    let honest: Vec<NodeId> = (0..cfg.nodes as u32).map(NodeId).filter(|n| !attackers.contains(n)).collect();
    let mut rng = fork_stream(seed, b"traffic");
    (0..cfg.traffic.flows)
        .map(|i| {
            let s = rng.below(honest.len() as u64) as usize;
            let mut d = rng.below(honest.len() as u64 - 1) as usize;
            if d >= s {
                d += 1;
            }
            Flow {
                id: i as u32,
                src: honest[s],
                dst: honest[d],
            }
        })
        .collect()
}
