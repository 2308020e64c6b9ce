//! Hybrid secure routing: AODV-style discovery whose control packets carry
//! per-hop signature chains, AOMDV-style multipath maintenance through
//! periodic signed updates, and trust-gated next-hop selection.
//!
//! Hop-count conventions match [`super::aodv`]: a received `hop_count` is the
//! receiver's distance to the message's source, so the sender's own distance
//! (its advertised hop count) is one less.

use std::collections::BTreeMap;

use super::common::{discovery_wait, DataBuffer, PendingDiscovery, SeenCache, TokenBucket};
use super::{AodvConfig, Ctx, DropReason, HsrpConfig, Output, RouteView, Timer};
use crate::crypto::{multisig_append, multisig_verify, ChainVerdict, MultiSig, PrivateKey};
use crate::error::{RouteError, TrustError};
use crate::kernel::SimTime;
use crate::packet::{
    ControlId, DataPacket, Hello, HelloReport, Packet, PacketKind, ProactiveUpdate, RerrMsg, RrepMsg, RreqId,
    RreqMsg, SignedControlPacket, SignedInner, UpdateId,
};
use crate::trace::{PathView, Record};
use crate::trust::{
    label_link, LinkLabel, LinkQuality, Outcome, Report, ReportKind, TrustClass, TrustConfig, TrustTable,
};
use crate::NodeId;

/// Advertised hop count of a destination with no usable path.
pub const INFINITE_HOPS: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathEntry {
    pub next_hop: NodeId,
    /// Neighbor of the destination on this path; paths are disjoint in both ends.
    pub last_hop: NodeId,
    pub hop_count: u32,
    pub expires_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    /// Fresher information replaced every path.
    Reset,
    /// A disjoint alternate path joined the set.
    Added,
    /// An existing path's lifetime was extended.
    Refreshed,
    Rejected,
}

/// Up to `k` link-disjoint loop-free paths to one destination.
///
/// `advertised_hop_count` is fixed when the set is (re)built from fresher
/// information; alternates are only accepted from neighbors advertising
/// strictly less, which keeps next-hop graphs acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultipathRouteSet {
    pub dest: NodeId,
    pub dest_seq: u32,
    pub advertised_hop_count: u32,
    pub paths: Vec<PathEntry>,
}

impl MultipathRouteSet {
    pub fn new(dest: NodeId) -> Self {
        MultipathRouteSet {
            dest,
            dest_seq: 0,
            advertised_hop_count: INFINITE_HOPS,
            paths: Vec::new(),
        }
    }

    pub fn prune(&mut self, now: SimTime) {
        self.paths.retain(|p| p.expires_at > now);
    }

    pub fn valid_paths(&self, now: SimTime) -> impl Iterator<Item = &PathEntry> {
        self.paths.iter().filter(move |p| p.expires_at > now)
    }

    pub fn is_usable(&self, now: SimTime) -> bool {
        self.valid_paths(now).next().is_some()
    }

    fn reset(&mut self, cand: PathEntry, seq: u32) {
        self.dest_seq = seq;
        self.advertised_hop_count = cand.hop_count;
        self.paths = vec![cand];
    }

    /// Equal-sequence handling shared by both acceptance modes.
    fn offer_equal(&mut self, cand: PathEntry, neighbor_adv: u32, k: usize) -> Offer {
        if let Some(p) = self.paths.iter_mut().find(|p| p.next_hop == cand.next_hop) {
            p.expires_at = p.expires_at.max(cand.expires_at);
            return Offer::Refreshed;
        }
        let disjoint = self
            .paths
            .iter()
            .all(|p| p.next_hop != cand.next_hop && p.last_hop != cand.last_hop);
        if neighbor_adv < self.advertised_hop_count && disjoint && self.paths.len() < k {
            self.paths.push(cand);
            return Offer::Added;
        }
        Offer::Rejected
    }

    /// Offers a path learned from a request or reply.
    ///
    /// `neighbor_adv` is the neighbor's own distance to the destination.
    pub fn offer(&mut self, cand: PathEntry, seq: u32, neighbor_adv: u32, k: usize, now: SimTime) -> Offer {
        self.prune(now);
        if seq > self.dest_seq || (seq == self.dest_seq && self.paths.is_empty()) {
            self.reset(cand, seq);
            return Offer::Reset;
        }
        if seq < self.dest_seq {
            return Offer::Rejected;
        }
        self.offer_equal(cand, neighbor_adv, k)
    }

    /// Offers a path learned from a periodic update: accepted only when the
    /// neighbor advertises strictly less than this node's own advertisement
    /// (unbounded while the set is empty), even if its sequence is fresher.
    pub fn offer_strict(&mut self, cand: PathEntry, seq: u32, neighbor_adv: u32, k: usize, now: SimTime) -> Offer {
        self.prune(now);
        if seq < self.dest_seq {
            return Offer::Rejected;
        }
        let own = if self.paths.is_empty() {
            INFINITE_HOPS
        } else {
            self.advertised_hop_count
        };
        if seq > self.dest_seq || self.paths.is_empty() {
            if neighbor_adv < own {
                self.reset(cand, seq);
                return Offer::Reset;
            }
            return Offer::Rejected;
        }
        self.offer_equal(cand, neighbor_adv, k)
    }

    /// Removes paths through `next_hop`; returns whether any were removed.
    pub fn remove_via(&mut self, next_hop: NodeId) -> bool {
        let before = self.paths.len();
        self.paths.retain(|p| p.next_hop != next_hop);
        self.paths.len() != before
    }

    /// Declares the destination unreachable: no paths, sequence bumped.
    pub fn invalidate(&mut self, seq_floor: u32) {
        self.paths.clear();
        self.dest_seq = (self.dest_seq + 1).max(seq_floor);
        self.advertised_hop_count = INFINITE_HOPS;
    }

    pub fn refresh_all(&mut self, now: SimTime, lifetime: SimTime) {
        let until = now.saturating_add(lifetime);
        for p in self.paths.iter_mut().filter(|p| p.expires_at > now) {
            p.expires_at = p.expires_at.max(until);
        }
    }

    pub fn views(&self, now: SimTime) -> Vec<PathView> {
        self.valid_paths(now)
            .map(|p| PathView {
                next_hop: p.next_hop,
                hop_count: p.hop_count,
                expires_at: p.expires_at,
            })
            .collect()
    }
}

/// No candidate next hop survived trust filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoTrustedRoute;

/// Picks a next hop among `(next_hop, hop_count)` candidates.
///
/// Bad candidates are excluded; survivors are ordered Good before Neutral,
/// then fewer hops, then higher fused trust, then lower node id.
pub fn trust_gate(candidates: &[(NodeId, u32)], table: &TrustTable) -> Result<NodeId, NoTrustedRoute> {
    candidates
        .iter()
        .filter(|(n, _)| table.class(*n) != TrustClass::Bad)
        .min_by(|(a, ha), (b, hb)| {
            let rank = |n: NodeId| u8::from(table.class(n) != TrustClass::Good);
            rank(*a)
                .cmp(&rank(*b))
                .then(ha.cmp(hb))
                .then(table.fused(*b).total_cmp(&table.fused(*a)))
                .then(a.cmp(b))
        })
        .map(|(n, _)| *n)
        .ok_or(NoTrustedRoute)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plausibility {
    Plausible,
    Implausible,
}

/// Sanity check of a reply's claims against what this node already knows.
///
/// Implausible when the sequence number jumps more than `delta_max` past the
/// last known one, or when a one-hop claim does not come from the
/// destination itself as a current neighbor.
pub fn blackhole_check(
    rrep: &RrepMsg,
    from: NodeId,
    last_known: Option<u32>,
    dest_is_neighbor: bool,
    delta_max: u32,
) -> Plausibility {
    if last_known.is_some_and(|k| rrep.dest_seq.saturating_sub(k) > delta_max) {
        return Plausibility::Implausible;
    }
    if rrep.hop_count == 1 && (from != rrep.dest || !dest_is_neighbor) {
        return Plausibility::Implausible;
    }
    Plausibility::Plausible
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignedOutcome {
    Forward,
    Reply,
    InstallOnly,
    Drop(DropReason),
}

#[derive(Debug)]
pub struct HsrpRouter {
    me: NodeId,
    aodv: AodvConfig,
    cfg: HsrpConfig,
    key: PrivateKey,
    own_seq: u32,
    rreq_counter: u32,
    update_counter: u32,
    routes: BTreeMap<NodeId, MultipathRouteSet>,
    seen: SeenCache,
    buffer: DataBuffer,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    /// Replies this node sent as destination, per request.
    replies: BTreeMap<RreqId, (usize, SimTime)>,
    buckets: BTreeMap<NodeId, TokenBucket>,
    last_used: BTreeMap<NodeId, SimTime>,
    trust: TrustTable,
    announced: BTreeMap<NodeId, TrustClass>,
    links: BTreeMap<NodeId, LinkQuality>,
    /// Peers to denounce with a 0.0 reputation report in the next HELLO.
    denounce: Vec<NodeId>,
    /// Engagement scores last shared as recommendations.
    shared: BTreeMap<NodeId, f64>,
}

impl HsrpRouter {
    pub fn new(me: NodeId, aodv: AodvConfig, cfg: HsrpConfig, key: PrivateKey) -> Result<Self, TrustError> {
        let trust = TrustTable::new(
            me,
            TrustConfig {
                weights: cfg.weights,
                window: cfg.report_window,
            },
        )?;
        Ok(HsrpRouter {
            me,
            seen: SeenCache::new(aodv.seen_retention, aodv.seen_capacity),
            buffer: DataBuffer::new(aodv.buffer_capacity),
            aodv,
            cfg,
            key,
            own_seq: 0,
            rreq_counter: 0,
            update_counter: 0,
            routes: BTreeMap::new(),
            pending: BTreeMap::new(),
            replies: BTreeMap::new(),
            buckets: BTreeMap::new(),
            last_used: BTreeMap::new(),
            trust,
            announced: BTreeMap::new(),
            links: BTreeMap::new(),
            denounce: Vec::new(),
            shared: BTreeMap::new(),
        })
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn trust(&self) -> &TrustTable {
        &self.trust
    }

    pub fn route_set(&self, dest: NodeId) -> Option<&MultipathRouteSet> {
        self.routes.get(&dest)
    }

    pub fn route_sets(&self) -> impl Iterator<Item = &MultipathRouteSet> {
        self.routes.values()
    }

    pub fn known_seq(&self, dest: NodeId) -> Option<u32> {
        self.routes.get(&dest).map(|s| s.dest_seq)
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// The path data would take now, ignoring trust.
    pub fn best_route(&self, dest: NodeId, now: SimTime) -> Option<RouteView> {
        let set = self.routes.get(&dest)?;
        set.valid_paths(now)
            .min_by_key(|p| (p.hop_count, p.next_hop))
            .map(|p| RouteView {
                next_hop: p.next_hop,
                hop_count: p.hop_count,
                dest_seq: set.dest_seq,
                expires_at: p.expires_at,
            })
    }

    pub fn link_label(&mut self, peer: NodeId, now: SimTime) -> LinkLabel {
        let q = self.links.entry(peer).or_default();
        q.bypass_count(now, self.cfg.bypass_window);
        label_link(q, self.cfg.bypass_threshold)
    }

    /// One snapshot record per peer this node holds trust evidence about.
    pub fn trust_snapshot(&mut self, now: SimTime) -> Vec<Record> {
        let peers: Vec<NodeId> = self.trust.records().map(|r| r.peer).collect();
        peers
            .into_iter()
            .map(|peer| {
                let link = self.link_label(peer, now);
                let r = self.trust.record(peer).expect("listed peer");
                let (engagement, reputation, recommendation) = r.components();
                Record::TrustSnapshot {
                    t: now,
                    node: self.me,
                    peer,
                    engagement,
                    reputation,
                    recommendation,
                    fused: r.fused,
                    class: r.class,
                    link,
                }
            })
            .collect()
    }

    pub fn start(&mut self, cx: &mut Ctx) {
        // Stagger maintenance so nodes do not all tick in the same instant.
        let first = SimTime((cx.rng.unit() * self.cfg.maintenance_interval.as_micros() as f64) as u64);
        cx.timer(first, Timer::Proactive);
    }

    fn trace_route(&self, cx: &mut Ctx, dest: NodeId) {
        if let Some(set) = self.routes.get(&dest) {
            cx.record(Record::Route {
                t: cx.now,
                node: self.me,
                dest,
                seq: set.dest_seq,
                paths: set.views(cx.now),
            });
        }
    }

    fn drop_control(&self, cx: &mut Ctx, kind: PacketKind, reason: DropReason, penalized: Option<NodeId>) {
        cx.record(Record::Drop {
            t: cx.now,
            node: self.me,
            kind,
            reason,
            penalized,
        });
    }

    /// Emits a trust record if `peer`'s class changed since last announced.
    fn announce_class(&mut self, cx: &mut Ctx, peer: NodeId) {
        let class = self.trust.class(peer);
        let before = self.announced.get(&peer).copied().unwrap_or(TrustClass::Neutral);
        if class != before {
            self.announced.insert(peer, class);
            cx.record(Record::Trust {
                t: cx.now,
                node: self.me,
                peer,
                fused: self.trust.fused(peer),
                class,
            });
        }
    }

    /// Feeds one direct observation of `peer` into the trust table.
    pub fn observe(&mut self, cx: &mut Ctx, peer: NodeId, outcome: Outcome) {
        if peer == self.me {
            return;
        }
        self.trust
            .record_interaction(peer, outcome)
            .expect("peer is not the owner");
        if outcome == Outcome::Failure {
            self.links.entry(peer).or_default().record_bypass(cx.now);
        }
        self.announce_class(cx, peer);
    }

    fn penalize(&mut self, cx: &mut Ctx, peer: NodeId, denounce: bool) {
        self.observe(cx, peer, Outcome::Failure);
        if denounce && peer != self.me && !self.denounce.contains(&peer) {
            self.denounce.push(peer);
        }
    }

    fn sign(&self, cx: &Ctx, mut pkt: SignedControlPacket) -> Option<SignedControlPacket> {
        let canonical = pkt.canonical_bytes(pkt.chain.len() + 1);
        pkt.chain = multisig_append(&pkt.chain, self.me, &self.key, &canonical, cx.keys).ok()?;
        Some(pkt)
    }

    fn signed_fresh(&self, cx: &Ctx, inner: SignedInner) -> SignedControlPacket {
        self.sign(
            cx,
            SignedControlPacket {
                inner,
                chain: MultiSig::new(),
            },
        )
        .expect("an empty chain has no duplicate signer")
    }

    pub fn hsrp_discover(&mut self, cx: &mut Ctx, dest: NodeId) -> Result<(), RouteError> {
        if self.routes.get(&dest).is_some_and(|s| s.is_usable(cx.now)) {
            return Err(RouteError::RouteAlreadyValid(dest));
        }
        let attempt = self.pending.get(&dest).map_or(0, |p| p.attempt);
        self.send_rreq(cx, dest, attempt);
        Ok(())
    }

    fn send_rreq(&mut self, cx: &mut Ctx, dest: NodeId, attempt: u32) {
        self.own_seq += 1;
        self.rreq_counter += 1;
        let id = RreqId {
            origin: self.me,
            counter: self.rreq_counter,
        };
        self.seen.insert(ControlId::Rreq(id), cx.now);
        let msg = RreqMsg {
            id,
            origin_seq: self.own_seq,
            dest,
            dest_seq_known: self.known_seq(dest),
            hop_count: 1,
            ttl: self.aodv.ttl,
        };
        self.pending.insert(
            dest,
            PendingDiscovery {
                counter: id.counter,
                attempt,
            },
        );
        cx.timer(
            discovery_wait(self.aodv.net_traversal_time, attempt),
            Timer::Discovery {
                dest,
                counter: id.counter,
            },
        );
        let pkt = self.signed_fresh(cx, SignedInner::Rreq(msg));
        cx.broadcast(Packet::Signed(pkt));
    }

    pub fn handle(&mut self, cx: &mut Ctx, packet: &Packet, from: NodeId) {
        match packet {
            Packet::Signed(s) => {
                self.handle_signed(cx, s, from);
            }
            Packet::Rreq(_) | Packet::Rrep(_) => {
                if !self.cfg.allow_insecure_fallback {
                    self.drop_control(cx, packet.kind(), DropReason::Unsigned, None);
                    return;
                }
                let inner = match packet {
                    Packet::Rreq(m) => SignedInner::Rreq(m.clone()),
                    Packet::Rrep(m) => SignedInner::Rrep(m.clone()),
                    _ => unreachable!("matched above"),
                };
                let wrapped = SignedControlPacket {
                    inner,
                    chain: MultiSig::new(),
                };
                self.process(cx, &wrapped, from);
            }
            Packet::Rerr(m) => {
                if self.trust.class(from) == TrustClass::Bad {
                    self.drop_control(cx, PacketKind::Rerr, DropReason::Untrusted, None);
                    return;
                }
                self.handle_rerr(cx, m, from);
            }
            Packet::Hello(h) => self.handle_hello(cx, h, from),
            Packet::Data(d) => {
                self.forward_data(cx, *d);
            }
        }
    }

    /// Verifies a signed control packet, then processes it.
    pub fn handle_signed(&mut self, cx: &mut Ctx, pkt: &SignedControlPacket, from: NodeId) -> SignedOutcome {
        let kind = pkt.kind();
        if pkt.chain.is_empty() {
            self.drop_control(cx, kind, DropReason::Unsigned, None);
            return SignedOutcome::Drop(DropReason::Unsigned);
        }
        let canonical = pkt.canonical_bytes(pkt.chain.len());
        if let ChainVerdict::Invalid { at_index } = multisig_verify(&pkt.chain, cx.keys.directory(), &canonical, cx.keys)
        {
            cx.record(Record::Verdict {
                t: cx.now,
                node: self.me,
                from,
                kind,
                at_index,
            });
            self.penalize(cx, from, true);
            self.drop_control(cx, kind, DropReason::BadSignature, Some(from));
            return SignedOutcome::Drop(DropReason::BadSignature);
        }
        if pkt.chain.last_signer() != Some(from) {
            self.penalize(cx, from, false);
            self.drop_control(cx, kind, DropReason::Malformed, Some(from));
            return SignedOutcome::Drop(DropReason::Malformed);
        }
        self.process(cx, pkt, from)
    }

    fn process(&mut self, cx: &mut Ctx, pkt: &SignedControlPacket, from: NodeId) -> SignedOutcome {
        let untrusted_origin = match &pkt.inner {
            SignedInner::Rreq(m) => self.trust.class(m.origin()) == TrustClass::Bad,
            _ => false,
        };
        if self.trust.class(from) == TrustClass::Bad || untrusted_origin {
            self.drop_control(cx, pkt.kind(), DropReason::Untrusted, None);
            return SignedOutcome::Drop(DropReason::Untrusted);
        }
        match &pkt.inner {
            SignedInner::Rreq(m) => self.handle_rreq(cx, pkt, m, from),
            SignedInner::Rrep(m) => self.handle_rrep(cx, pkt, m, from),
            SignedInner::Update(u) => self.handle_update(cx, pkt, u, from),
        }
    }

    /// Neighbor of the chain's first signer along the path back to it.
    fn last_hop_of(&self, chain: &MultiSig) -> NodeId {
        chain.signers().nth(1).unwrap_or(self.me)
    }

    fn send_dest_reply(&mut self, cx: &mut Ctx, m: &RreqMsg, to: NodeId) {
        self.own_seq = self.own_seq.max(m.dest_seq_known.unwrap_or(0));
        let rrep = RrepMsg {
            origin: m.origin(),
            dest: self.me,
            dest_seq: self.own_seq,
            hop_count: 1,
            lifetime: self.aodv.my_route_timeout,
        };
        let pkt = self.signed_fresh(cx, SignedInner::Rrep(rrep));
        cx.unicast(to, Packet::Signed(pkt));
        let now = cx.now;
        let entry = self.replies.entry(m.id).or_insert((0, now));
        entry.0 += 1;
    }

    fn handle_rreq(&mut self, cx: &mut Ctx, pkt: &SignedControlPacket, m: &RreqMsg, from: NodeId) -> SignedOutcome {
        let now = cx.now;
        let origin = m.origin();
        if origin == self.me {
            self.drop_control(cx, PacketKind::Rreq, DropReason::Duplicate, None);
            return SignedOutcome::Drop(DropReason::Duplicate);
        }
        let cand = PathEntry {
            next_hop: from,
            last_hop: if pkt.chain.is_empty() { from } else { self.last_hop_of(&pkt.chain) },
            hop_count: m.hop_count,
            expires_at: now.saturating_add(self.aodv.active_route_lifetime),
        };
        let k = self.cfg.k_paths;
        if !self.seen.insert(ControlId::Rreq(m.id), now) {
            // A later copy may still contribute a disjoint reverse path.
            let set = self.routes.entry(origin).or_insert_with(|| MultipathRouteSet::new(origin));
            let offer = set.offer(cand, m.origin_seq, m.hop_count.saturating_sub(1), k, now);
            if offer == Offer::Added {
                self.trace_route(cx, origin);
                let sent = self.replies.get(&m.id).map_or(0, |r| r.0);
                if m.dest == self.me && sent < k {
                    self.send_dest_reply(cx, m, from);
                }
            }
            self.drop_control(cx, PacketKind::Rreq, DropReason::Duplicate, None);
            return SignedOutcome::Drop(DropReason::Duplicate);
        }
        cx.record(Record::HfStore {
            t: now,
            node: self.me,
            id: ControlId::Rreq(m.id),
        });
        let set = self.routes.entry(origin).or_insert_with(|| MultipathRouteSet::new(origin));
        if matches!(
            set.offer(cand, m.origin_seq, m.hop_count.saturating_sub(1), k, now),
            Offer::Reset | Offer::Added
        ) {
            self.trace_route(cx, origin);
        }

        if m.dest == self.me {
            let retention = self.aodv.seen_retention;
            self.replies.retain(|_, (_, at)| at.saturating_add(retention) >= now);
            self.send_dest_reply(cx, m, from);
            return SignedOutcome::Reply;
        }

        if let Some(set) = self.routes.get(&m.dest).filter(|s| s.is_usable(now)) {
            let fresh_enough = m.dest_seq_known.is_none_or(|known| set.dest_seq >= known);
            let candidates: Vec<(NodeId, u32)> = set.valid_paths(now).map(|p| (p.next_hop, p.hop_count)).collect();
            let chosen = trust_gate(&candidates, &self.trust).ok();
            if fresh_enough && chosen.is_some_and(|n| n != from) {
                let lifetime = set
                    .valid_paths(now)
                    .map(|p| p.expires_at)
                    .max()
                    .expect("usable set")
                    .saturating_sub(now);
                let rrep = RrepMsg {
                    origin,
                    dest: m.dest,
                    dest_seq: set.dest_seq,
                    hop_count: set.advertised_hop_count.saturating_add(1),
                    lifetime,
                };
                let reply = self.signed_fresh(cx, SignedInner::Rrep(rrep));
                cx.unicast(from, Packet::Signed(reply));
                return SignedOutcome::Reply;
            }
        }

        if m.ttl <= 1 {
            self.drop_control(cx, PacketKind::Rreq, DropReason::Ttl, None);
            return SignedOutcome::Drop(DropReason::Ttl);
        }
        let (capacity, rate) = (self.cfg.bucket_capacity, self.cfg.bucket_rate);
        let bucket = self
            .buckets
            .entry(origin)
            .or_insert_with(|| TokenBucket::new(capacity, rate, now));
        if !bucket.try_take(now) {
            self.penalize(cx, origin, false);
            self.drop_control(cx, PacketKind::Rreq, DropReason::RateLimited, Some(origin));
            return SignedOutcome::Drop(DropReason::RateLimited);
        }
        let mut fwd = m.clone();
        fwd.hop_count += 1;
        fwd.ttl -= 1;
        let out = SignedControlPacket {
            inner: SignedInner::Rreq(fwd),
            chain: pkt.chain.clone(),
        };
        if pkt.chain.is_empty() {
            cx.broadcast(Packet::Rreq(match out.inner {
                SignedInner::Rreq(r) => r,
                _ => unreachable!("built as a request"),
            }));
            return SignedOutcome::Forward;
        }
        match self.sign(cx, out) {
            Some(signed) => {
                cx.broadcast(Packet::Signed(signed));
                SignedOutcome::Forward
            }
            None => {
                self.drop_control(cx, PacketKind::Rreq, DropReason::Malformed, None);
                SignedOutcome::Drop(DropReason::Malformed)
            }
        }
    }

    fn handle_rrep(&mut self, cx: &mut Ctx, pkt: &SignedControlPacket, m: &RrepMsg, from: NodeId) -> SignedOutcome {
        let now = cx.now;
        if m.dest == self.me {
            self.drop_control(cx, PacketKind::Rrep, DropReason::Worse, None);
            return SignedOutcome::Drop(DropReason::Worse);
        }
        let replier = pkt.chain.first_signer().unwrap_or(from);
        if blackhole_check(m, from, self.known_seq(m.dest), cx.is_neighbor(m.dest), self.cfg.delta_max)
            == Plausibility::Implausible
        {
            self.penalize(cx, replier, true);
            self.drop_control(cx, PacketKind::Rrep, DropReason::ImplausibleSeq, Some(replier));
            return SignedOutcome::Drop(DropReason::ImplausibleSeq);
        }
        let last_hop = if pkt.chain.is_empty() {
            from
        } else if replier == m.dest {
            self.last_hop_of(&pkt.chain)
        } else {
            replier
        };
        let cand = PathEntry {
            next_hop: from,
            last_hop,
            hop_count: m.hop_count,
            expires_at: now.saturating_add(m.lifetime),
        };
        let k = self.cfg.k_paths;
        let set = self.routes.entry(m.dest).or_insert_with(|| MultipathRouteSet::new(m.dest));
        let offer = set.offer(cand, m.dest_seq, m.hop_count.saturating_sub(1), k, now);
        match offer {
            Offer::Rejected => {
                self.drop_control(cx, PacketKind::Rrep, DropReason::Worse, None);
                return SignedOutcome::Drop(DropReason::Worse);
            }
            Offer::Reset | Offer::Added => self.trace_route(cx, m.dest),
            Offer::Refreshed => {}
        }
        if m.origin == self.me {
            self.pending.remove(&m.dest);
            self.flush(cx, m.dest);
            return SignedOutcome::InstallOnly;
        }
        if offer != Offer::Reset {
            return SignedOutcome::InstallOnly;
        }
        let Ok(next) = self.select(cx, m.origin) else {
            self.drop_control(cx, PacketKind::Rrep, DropReason::NoReverseRoute, None);
            return SignedOutcome::Drop(DropReason::NoReverseRoute);
        };
        let mut fwd = m.clone();
        fwd.hop_count += 1;
        if pkt.chain.is_empty() {
            cx.unicast(next, Packet::Rrep(fwd));
            return SignedOutcome::Forward;
        }
        let out = SignedControlPacket {
            inner: SignedInner::Rrep(fwd),
            chain: pkt.chain.clone(),
        };
        match self.sign(cx, out) {
            Some(signed) => {
                cx.unicast(next, Packet::Signed(signed));
                SignedOutcome::Forward
            }
            None => {
                self.drop_control(cx, PacketKind::Rrep, DropReason::Malformed, None);
                SignedOutcome::Drop(DropReason::Malformed)
            }
        }
    }

    fn handle_update(
        &mut self,
        cx: &mut Ctx,
        pkt: &SignedControlPacket,
        u: &ProactiveUpdate,
        from: NodeId,
    ) -> SignedOutcome {
        let now = cx.now;
        if pkt.chain.len() != 1 || u.id.issuer != from || u.about_dest == self.me {
            let reason = if u.about_dest == self.me {
                DropReason::Worse
            } else {
                DropReason::Malformed
            };
            self.drop_control(cx, PacketKind::Proactive, reason, None);
            return SignedOutcome::Drop(reason);
        }
        if !self.seen.insert(ControlId::Update(u.id), now) {
            self.drop_control(cx, PacketKind::Proactive, DropReason::Duplicate, None);
            return SignedOutcome::Drop(DropReason::Duplicate);
        }
        cx.record(Record::HfStore {
            t: now,
            node: self.me,
            id: ControlId::Update(u.id),
        });
        let lifetime = self.aodv.active_route_lifetime;
        let k = self.cfg.k_paths;
        let dest = u.about_dest;
        let set = self.routes.entry(dest).or_insert_with(|| MultipathRouteSet::new(dest));
        if u.dest_seq == set.dest_seq {
            set.refresh_all(now, lifetime);
        }
        if u.advertised_hop_count == INFINITE_HOPS {
            return SignedOutcome::InstallOnly;
        }
        let cand = PathEntry {
            next_hop: from,
            last_hop: if from == dest { self.me } else { from },
            hop_count: u.advertised_hop_count.saturating_add(1),
            expires_at: now.saturating_add(lifetime),
        };
        match set.offer_strict(cand, u.dest_seq, u.advertised_hop_count, k, now) {
            Offer::Reset | Offer::Added => self.trace_route(cx, dest),
            Offer::Refreshed | Offer::Rejected => {}
        }
        SignedOutcome::InstallOnly
    }

    fn handle_hello(&mut self, cx: &mut Ctx, h: &Hello, from: NodeId) {
        for r in &h.reports {
            let report = Report {
                reporter: from,
                peer: r.peer,
                score: r.score,
                at: cx.now,
            };
            // Malformed reports (self-reports, scores out of range) are ignored.
            if let Ok(true) = self.trust.ingest_report(r.kind, report) {
                self.announce_class(cx, r.peer);
            }
        }
    }

    /// Builds this node's HELLO: pending denunciations first, then
    /// engagement scores that changed since they were last shared.
    pub fn hello(&mut self, _cx: &mut Ctx) -> Hello {
        let max = self.cfg.max_reports_per_hello;
        let mut reports: Vec<HelloReport> = Vec::new();
        while reports.len() < max && !self.denounce.is_empty() {
            reports.push(HelloReport {
                kind: ReportKind::Reputation,
                peer: self.denounce.remove(0),
                score: 0.0,
            });
        }
        for rec in self.trust.records() {
            if reports.len() >= max {
                break;
            }
            let e = rec.engagement.score();
            if rec.engagement.successes + rec.engagement.failures == 0 || self.shared.get(&rec.peer) == Some(&e) {
                continue;
            }
            reports.push(HelloReport {
                kind: ReportKind::Recommendation,
                peer: rec.peer,
                score: e,
            });
        }
        for r in &reports {
            if r.kind == ReportKind::Recommendation {
                self.shared.insert(r.peer, r.score);
            }
        }
        Hello { reports }
    }

    /// Trust-gated choice among `dest`'s valid paths, with a selection record.
    ///
    /// When every candidate is Bad, those paths are purged.
    fn select(&mut self, cx: &mut Ctx, dest: NodeId) -> Result<NodeId, DropReason> {
        let now = cx.now;
        let set = self.routes.get(&dest).ok_or(DropReason::NoRoute)?;
        let candidates: Vec<(NodeId, u32)> = set.valid_paths(now).map(|p| (p.next_hop, p.hop_count)).collect();
        if candidates.is_empty() {
            return Err(DropReason::NoRoute);
        }
        let chosen = trust_gate(&candidates, &self.trust).ok();
        cx.record(Record::Select {
            t: now,
            node: self.me,
            dest,
            candidates: candidates.len() as u32,
            chosen,
            class: chosen.map(|n| self.trust.class(n)),
        });
        match chosen {
            Some(n) => Ok(n),
            None => {
                let set = self.routes.get_mut(&dest).expect("looked up above");
                for (n, _) in &candidates {
                    set.remove_via(*n);
                }
                self.trace_route(cx, dest);
                Err(DropReason::NoTrustedRoute)
            }
        }
    }

    fn flush(&mut self, cx: &mut Ctx, dest: NodeId) {
        for p in self.buffer.take_for(dest) {
            self.forward_data(cx, p);
        }
    }

    pub fn forward_data(&mut self, cx: &mut Ctx, mut p: DataPacket) -> Option<NodeId> {
        let now = cx.now;
        if p.dst == self.me {
            cx.out.push(Output::Deliver(p));
            return None;
        }
        let selected = self.select(cx, p.dst);
        if let Ok(next) = selected {
            if p.hops >= self.aodv.ttl {
                cx.drop_data(p, DropReason::HopLimit);
                return None;
            }
            let lifetime = self.aodv.active_route_lifetime;
            if let Some(set) = self.routes.get_mut(&p.dst) {
                if let Some(path) = set.paths.iter_mut().find(|x| x.next_hop == next) {
                    path.expires_at = path.expires_at.max(now.saturating_add(lifetime));
                }
            }
            self.last_used.insert(p.dst, now);
            p.hops += 1;
            cx.unicast(next, Packet::Data(p));
            return Some(next);
        }
        if p.src == self.me {
            if let Some(evicted) = self.buffer.push(p) {
                cx.drop_data(evicted, DropReason::BufferOverflow);
            }
            if !self.pending.contains_key(&p.dst) {
                self.send_rreq(cx, p.dst, 0);
            }
            return None;
        }
        cx.drop_data(p, selected.expect_err("handled above"));
        let seq = self.known_seq(p.dst).unwrap_or(0);
        cx.broadcast(Packet::Rerr(RerrMsg {
            unreachable: vec![(p.dst, seq)],
        }));
        None
    }

    /// Drops every path through `dead`; destinations left without paths are
    /// invalidated and announced in a single RERR.
    pub fn handle_link_break(&mut self, cx: &mut Ctx, dead: NodeId) -> Option<RerrMsg> {
        let now = cx.now;
        let mut changed = Vec::new();
        let mut unreachable = Vec::new();
        for (dest, set) in self.routes.iter_mut() {
            if !set.remove_via(dead) {
                continue;
            }
            changed.push(*dest);
            if !set.is_usable(now) {
                set.invalidate(0);
                unreachable.push((*dest, set.dest_seq));
            }
        }
        for d in changed {
            self.trace_route(cx, d);
        }
        if unreachable.is_empty() {
            return None;
        }
        let rerr = RerrMsg { unreachable };
        cx.broadcast(Packet::Rerr(rerr.clone()));
        Some(rerr)
    }

    pub fn handle_rerr(&mut self, cx: &mut Ctx, m: &RerrMsg, from: NodeId) -> Vec<NodeId> {
        let now = cx.now;
        let mut changed = Vec::new();
        let mut unreachable = Vec::new();
        for (dest, seq) in &m.unreachable {
            let Some(set) = self.routes.get_mut(dest) else {
                continue;
            };
            if !set.remove_via(from) {
                continue;
            }
            changed.push(*dest);
            if !set.is_usable(now) {
                set.invalidate(*seq);
                unreachable.push((*dest, set.dest_seq));
            }
        }
        for d in &changed {
            self.trace_route(cx, *d);
        }
        let dests = unreachable.iter().map(|(d, _)| *d).collect();
        if !unreachable.is_empty() {
            cx.broadcast(Packet::Rerr(RerrMsg { unreachable }));
        }
        dests
    }

    /// Destinations with usable paths that carried data recently.
    fn active_destinations(&self, now: SimTime) -> Vec<NodeId> {
        let lifetime = self.aodv.active_route_lifetime;
        self.routes
            .values()
            .filter(|s| s.is_usable(now))
            .filter(|s| {
                self.last_used
                    .get(&s.dest)
                    .is_some_and(|t| t.saturating_add(lifetime) > now)
            })
            .map(|s| s.dest)
            .collect()
    }

    /// Sends one signed update per active destination to each path's next hop.
    pub fn proactive_tick(&mut self, cx: &mut Ctx) -> Vec<SignedControlPacket> {
        let now = cx.now;
        let mut sent = Vec::new();
        for dest in self.active_destinations(now) {
            self.update_counter += 1;
            let set = &self.routes[&dest];
            let update = ProactiveUpdate {
                id: UpdateId {
                    issuer: self.me,
                    counter: self.update_counter,
                },
                about_dest: dest,
                dest_seq: set.dest_seq,
                advertised_hop_count: set.advertised_hop_count,
                issued_at: now,
            };
            let next_hops: Vec<NodeId> = set.valid_paths(now).map(|p| p.next_hop).collect();
            let pkt = self.signed_fresh(cx, SignedInner::Update(update));
            for n in next_hops {
                cx.unicast(n, Packet::Signed(pkt.clone()));
                sent.push(pkt.clone());
            }
        }
        sent
    }

    pub fn on_timer(&mut self, cx: &mut Ctx, timer: Timer) {
        match timer {
            Timer::Proactive => {
                self.proactive_tick(cx);
                cx.timer(self.cfg.maintenance_interval, Timer::Proactive);
            }
            Timer::Discovery { dest, counter } => {
                let Some(p) = self.pending.get(&dest).copied() else {
                    return;
                };
                if p.counter != counter {
                    return;
                }
                if self.routes.get(&dest).is_some_and(|s| s.is_usable(cx.now)) {
                    self.pending.remove(&dest);
                    self.flush(cx, dest);
                    return;
                }
                if p.attempt < self.aodv.rreq_retries {
                    self.send_rreq(cx, dest, p.attempt + 1);
                } else {
                    self.pending.remove(&dest);
                    for d in self.buffer.take_for(dest) {
                        cx.drop_data(d, DropReason::DiscoveryFailed);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{KeyCenter, KeyPairRecord};
    use crate::kernel::{fork_stream, RandomStream};

    fn path(next: u32, last: u32, hop: u32) -> PathEntry {
        PathEntry {
            next_hop: NodeId(next),
            last_hop: NodeId(last),
            hop_count: hop,
            expires_at: SimTime::from_secs(100),
        }
    }

    #[test]
    fn offer_resets_on_fresher_and_adds_disjoint_alternates() {
        let now = SimTime::from_secs(1);
        let mut s = MultipathRouteSet::new(NodeId(9));
        assert_eq!(s.offer(path(1, 5, 3), 4, 2, 3, now), Offer::Reset);
        assert_eq!(s.advertised_hop_count, 3);
        // Same next hop: refresh only.
        assert_eq!(s.offer(path(1, 6, 3), 4, 2, 3, now), Offer::Refreshed);
        // Shares the last hop: not disjoint.
        assert_eq!(s.offer(path(2, 5, 3), 4, 2, 3, now), Offer::Rejected);
        assert_eq!(s.offer(path(2, 6, 3), 4, 2, 3, now), Offer::Added);
        // Neighbor advertising as much as we do could route through us.
        assert_eq!(s.offer(path(3, 7, 4), 4, 3, 3, now), Offer::Rejected);
        assert_eq!(s.offer(path(3, 7, 2), 4, 1, 3, now), Offer::Added);
        // Full at K = 3.
        assert_eq!(s.offer(path(4, 8, 1), 4, 0, 3, now), Offer::Rejected);
        // Stale sequence.
        assert_eq!(s.offer(path(4, 8, 1), 3, 0, 3, now), Offer::Rejected);
        assert_eq!(s.offer(path(4, 8, 7), 5, 6, 3, now), Offer::Reset);
        assert_eq!(s.paths.len(), 1);
    }

    #[test]
    fn strict_offer_needs_smaller_advertisement_even_when_fresher() {
        let now = SimTime::from_secs(1);
        let mut s = MultipathRouteSet::new(NodeId(9));
        s.offer(path(1, 5, 3), 4, 2, 3, now);
        assert_eq!(s.offer_strict(path(2, 2, 4), 5, 3, 3, now), Offer::Rejected);
        assert_eq!(s.offer_strict(path(2, 2, 3), 5, 2, 3, now), Offer::Reset);
        assert_eq!(s.dest_seq, 5);
    }

    #[test]
    fn invalidation_bumps_sequence_and_clears_advertisement() {
        let now = SimTime::from_secs(1);
        let mut s = MultipathRouteSet::new(NodeId(9));
        s.offer(path(1, 5, 3), 4, 2, 3, now);
        s.invalidate(0);
        assert_eq!((s.dest_seq, s.advertised_hop_count), (5, INFINITE_HOPS));
        s.invalidate(9);
        assert_eq!(s.dest_seq, 9);
    }

    fn table_with(scores: &[(u32, u64, u64)]) -> TrustTable {
        let mut t = TrustTable::new(NodeId(0), TrustConfig::default()).unwrap();
        for &(peer, ok, bad) in scores {
            for _ in 0..ok {
                t.record_interaction(NodeId(peer), Outcome::Success).unwrap();
            }
            for _ in 0..bad {
                t.record_interaction(NodeId(peer), Outcome::Failure).unwrap();
            }
        }
        t
    }

    #[test]
    fn gate_prefers_fewer_hops_among_equals() {
        let t = table_with(&[]);
        assert_eq!(trust_gate(&[(NodeId(3), 4), (NodeId(2), 2), (NodeId(1), 3)], &t), Ok(NodeId(2)));
    }

    #[test]
    fn gate_skips_bad_candidates() {
        // Two failures: E = 1/4, fused = 0.125 + 0.15 + 0.1 = 0.375.
        let t = table_with(&[(1, 0, 2)]);
        assert_eq!(t.class(NodeId(1)), TrustClass::Bad);
        assert_eq!(trust_gate(&[(NodeId(1), 1), (NodeId(2), 5)], &t), Ok(NodeId(2)));
        assert_eq!(trust_gate(&[(NodeId(1), 1)], &t), Err(NoTrustedRoute));
    }

    #[test]
    fn gate_breaks_hop_ties_by_fused_then_id() {
        let t = table_with(&[(2, 5, 0)]);
        assert_eq!(trust_gate(&[(NodeId(1), 2), (NodeId(2), 2)], &t), Ok(NodeId(2)));
        let t = table_with(&[]);
        assert_eq!(trust_gate(&[(NodeId(4), 2), (NodeId(3), 2)], &t), Ok(NodeId(3)));
    }

    fn rrep(seq: u32, hop: u32) -> RrepMsg {
        RrepMsg {
            origin: NodeId(0),
            dest: NodeId(5),
            dest_seq: seq,
            hop_count: hop,
            lifetime: SimTime::from_secs(20),
        }
    }

    #[test]
    fn blackhole_check_examples() {
        assert_eq!(blackhole_check(&rrep(20, 3), NodeId(1), Some(10), false, 50), Plausibility::Plausible);
        assert_eq!(blackhole_check(&rrep(10_000, 3), NodeId(1), Some(10), false, 50), Plausibility::Implausible);
        assert_eq!(blackhole_check(&rrep(1, 1), NodeId(1), None, false, 50), Plausibility::Implausible);
        assert_eq!(blackhole_check(&rrep(1, 1), NodeId(5), None, true, 50), Plausibility::Plausible);
        assert_eq!(blackhole_check(&rrep(1, 1), NodeId(5), None, false, 50), Plausibility::Implausible);
    }

    struct Net {
        keys: KeyCenter,
        pairs: Vec<KeyPairRecord>,
        neighbors: BTreeMap<NodeId, SimTime>,
        rng: RandomStream,
        out: Vec<Output>,
        now: SimTime,
    }

    impl Net {
        fn new(n: u32) -> Self {
            let mut keys = KeyCenter::new();
            let mut s = fork_stream(3, b"keys");
            let pairs = (0..n).map(|i| keys.keygen(NodeId(i), &mut s).unwrap()).collect();
            Net {
                keys,
                pairs,
                neighbors: BTreeMap::new(),
                rng: fork_stream(3, b"rng"),
                out: Vec::new(),
                now: SimTime::from_secs(1),
            }
        }

        fn router(&self, me: u32) -> HsrpRouter {
            HsrpRouter::new(
                NodeId(me),
                AodvConfig::default(),
                HsrpConfig::default(),
                self.pairs[me as usize].private_key.clone(),
            )
            .unwrap()
        }

        fn cx(&mut self, me: u32) -> Ctx<'_> {
            Ctx {
                now: self.now,
                me: NodeId(me),
                neighbors: &self.neighbors,
                keys: &self.keys,
                rng: &mut self.rng,
                out: &mut self.out,
            }
        }

        fn signed(&mut self) -> Vec<(Option<NodeId>, SignedControlPacket)> {
            self.out
                .drain(..)
                .filter_map(|o| match o {
                    Output::Send {
                        to,
                        packet: Packet::Signed(s),
                    } => Some((to, s)),
                    _ => None,
                })
                .collect()
        }

        fn verifies(&self, s: &SignedControlPacket) -> bool {
            multisig_verify(&s.chain, self.keys.directory(), &s.canonical_bytes(s.chain.len()), &self.keys).is_valid()
        }
    }

    #[test]
    fn discovery_opens_chain_and_forwarder_appends() {
        let mut net = Net::new(4);
        let mut a = net.router(0);
        let mut b = net.router(1);
        a.hsrp_discover(&mut net.cx(0), NodeId(3)).unwrap();
        let sent = net.signed();
        assert_eq!(sent.len(), 1);
        let rreq = sent[0].1.clone();
        assert_eq!(rreq.hop_list(), vec![NodeId(0)]);
        assert!(net.verifies(&rreq));

        assert_eq!(b.handle_signed(&mut net.cx(1), &rreq, NodeId(0)), SignedOutcome::Forward);
        let fwd = net.signed().remove(0).1;
        assert_eq!(fwd.hop_list(), vec![NodeId(0), NodeId(1)]);
        assert!(net.verifies(&fwd));
    }

    #[test]
    fn discovery_with_valid_route_is_refused() {
        let mut net = Net::new(4);
        let mut a = net.router(0);
        let mut d = net.router(3);
        d.hsrp_discover(&mut net.cx(3), NodeId(0)).unwrap();
        let rreq = net.signed().remove(0).1;
        a.handle_signed(&mut net.cx(0), &rreq, NodeId(3));
        assert_eq!(
            a.hsrp_discover(&mut net.cx(0), NodeId(3)),
            Err(RouteError::RouteAlreadyValid(NodeId(3)))
        );
    }

    /// Destination 2 answers origin 0's request relayed by 1.
    fn reply_through_relay(net: &mut Net) -> (HsrpRouter, HsrpRouter, SignedControlPacket) {
        let mut a = net.router(0);
        let mut b = net.router(1);
        let mut d = net.router(2);
        a.hsrp_discover(&mut net.cx(0), NodeId(2)).unwrap();
        let rreq = net.signed().remove(0).1;
        b.handle_signed(&mut net.cx(1), &rreq, NodeId(0));
        let fwd = net.signed().remove(0).1;
        assert_eq!(d.handle_signed(&mut net.cx(2), &fwd, NodeId(1)), SignedOutcome::Reply);
        let reply = net.signed().remove(0).1;
        net.neighbors.insert(NodeId(2), net.now);
        assert_eq!(b.handle_signed(&mut net.cx(1), &reply, NodeId(2)), SignedOutcome::Forward);
        let relayed = net.signed().remove(0).1;
        assert_eq!(relayed.hop_list(), vec![NodeId(2), NodeId(1)]);
        (a, b, relayed)
    }

    #[test]
    fn honest_reply_installs_path() {
        let mut net = Net::new(3);
        let (mut a, _, relayed) = reply_through_relay(&mut net);
        assert_eq!(a.handle_signed(&mut net.cx(0), &relayed, NodeId(1)), SignedOutcome::InstallOnly);
        let r = a.best_route(NodeId(2), net.now).unwrap();
        assert_eq!((r.next_hop, r.hop_count), (NodeId(1), 2));
    }

    #[test]
    fn tampered_reply_is_dropped_and_forwarder_penalized() {
        let mut net = Net::new(3);
        let (mut a, _, mut relayed) = reply_through_relay(&mut net);
        if let SignedInner::Rrep(m) = &mut relayed.inner {
            m.dest_seq += 1;
        }
        assert_eq!(
            a.handle_signed(&mut net.cx(0), &relayed, NodeId(1)),
            SignedOutcome::Drop(DropReason::BadSignature)
        );
        assert!(net.out.iter().any(|o| matches!(o, Output::Record(Record::Verdict { from: NodeId(1), .. }))));
        assert_eq!(a.trust().class(NodeId(1)), TrustClass::Bad);
        let hello = a.hello(&mut net.cx(0));
        assert!(hello.reports.iter().any(|r| r.peer == NodeId(1) && r.kind == ReportKind::Reputation));
    }

    #[test]
    fn forged_one_hop_reply_is_implausible() {
        let mut net = Net::new(5);
        let mut a = net.router(0);
        a.hsrp_discover(&mut net.cx(0), NodeId(4)).unwrap();
        net.out.clear();
        // Node 3 claims to be one hop from 4 with an inflated sequence.
        let bh = net.router(3);
        let forged = bh.signed_fresh(
            &net.cx(3),
            SignedInner::Rrep(RrepMsg {
                origin: NodeId(0),
                dest: NodeId(4),
                dest_seq: 10_000,
                hop_count: 1,
                lifetime: SimTime::from_secs(20),
            }),
        );
        net.neighbors.insert(NodeId(3), net.now);
        assert_eq!(
            a.handle_signed(&mut net.cx(0), &forged, NodeId(3)),
            SignedOutcome::Drop(DropReason::ImplausibleSeq)
        );
        assert!(net.out.iter().any(|o| matches!(
            o,
            Output::Record(Record::Drop { penalized: Some(NodeId(3)), reason: DropReason::ImplausibleSeq, .. })
        )));
        assert!(a.best_route(NodeId(4), net.now).is_none());
    }

    #[test]
    fn flood_guard_limits_forwarding_per_originator() {
        let mut net = Net::new(3);
        let mut f = net.router(0);
        let mut b = net.router(1);
        let mut forwarded = 0;
        for _ in 0..25 {
            f.hsrp_discover(&mut net.cx(0), crate::packet::NONEXISTENT).ok();
            let rreq = net.signed().remove(0).1;
            if b.handle_signed(&mut net.cx(1), &rreq, NodeId(0)) == SignedOutcome::Forward {
                forwarded += 1;
            }
            net.out.clear();
            if b.trust().class(NodeId(0)) == TrustClass::Bad {
                break;
            }
        }
        assert!(forwarded <= 10, "forwarded {forwarded}");
        assert!(forwarded >= 1);
    }

    #[test]
    fn proactive_tick_fans_out_per_path() {
        let mut net = Net::new(6);
        let mut r = net.router(0);
        assert!(r.proactive_tick(&mut net.cx(0)).is_empty());
        let now = net.now;
        let set = r.routes.entry(NodeId(5)).or_insert_with(|| MultipathRouteSet::new(NodeId(5)));
        set.offer(path(1, 3, 2), 1, 1, 3, now);
        set.offer(path(2, 4, 2), 1, 1, 3, now);
        // Not yet active: no data has used it.
        assert!(r.proactive_tick(&mut net.cx(0)).is_empty());
        r.last_used.insert(NodeId(5), now);
        let sent = r.proactive_tick(&mut net.cx(0));
        assert_eq!(sent.len(), 2);
        assert!(sent.iter().all(|s| s.chain.len() == 1 && net.verifies(s)));
    }

    #[test]
    fn update_with_larger_advertisement_is_not_adopted() {
        let mut net = Net::new(6);
        let mut issuer = net.router(2);
        let mut recv = net.router(1);
        let now = net.now;
        issuer
            .routes
            .entry(NodeId(5))
            .or_insert_with(|| MultipathRouteSet::new(NodeId(5)))
            .offer(path(1, 1, 3), 1, 2, 3, now);
        recv.routes
            .entry(NodeId(5))
            .or_insert_with(|| MultipathRouteSet::new(NodeId(5)))
            .offer(path(5, 1, 2), 1, 1, 3, now);
        issuer.last_used.insert(NodeId(5), now);
        let upd = issuer.proactive_tick(&mut net.cx(2)).remove(0);
        net.out.clear();
        recv.handle_signed(&mut net.cx(1), &upd, NodeId(2));
        let set = recv.route_set(NodeId(5)).unwrap();
        assert!(set.paths.iter().all(|p| p.next_hop != NodeId(2)));
    }

    #[test]
    fn unsigned_control_is_refused_without_fallback() {
        let mut net = Net::new(2);
        let mut b = net.router(1);
        let m = RreqMsg {
            id: RreqId {
                origin: NodeId(0),
                counter: 1,
            },
            origin_seq: 1,
            dest: NodeId(7),
            dest_seq_known: None,
            hop_count: 1,
            ttl: 35,
        };
        b.handle(&mut net.cx(1), &Packet::Rreq(m), NodeId(0));
        assert!(net.out.iter().any(|o| matches!(
            o,
            Output::Record(Record::Drop { reason: DropReason::Unsigned, .. })
        )));
    }
}
