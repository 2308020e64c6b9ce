//! Baseline on-demand distance-vector routing.
//!
//! Hop counts on the wire count hops from the receiver to the message's
//! source: an originator sends its RREQ with `hop_count = 1`, a destination
//! answers with `hop_count = 1`, and every forwarder adds one. A receiver can
//! therefore install `hop_count` as-is.

use std::collections::BTreeMap;

use super::common::{discovery_wait, DataBuffer, PendingDiscovery, SeenCache};
use super::{AodvConfig, Ctx, DropReason, RouteView, Timer};
use crate::error::RouteError;
use crate::kernel::SimTime;
use crate::packet::{ControlId, DataPacket, Packet, PacketKind, RerrMsg, RrepMsg, RreqId, RreqMsg};
use crate::trace::{PathView, Record};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteState {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub dest_seq: u32,
    pub hop_count: u32,
    pub expires_at: SimTime,
    pub state: RouteState,
}

impl RouteEntry {
    pub fn is_valid(&self, now: SimTime) -> bool {
        self.state == RouteState::Valid && self.expires_at > now
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RreqOutcome {
    Forward,
    Reply,
    Drop(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrepOutcome {
    InstallAndForward,
    InstallOnly,
    Drop(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataOutcome {
    Delivered,
    NextHop(NodeId),
    Buffered,
    Dropped(DropReason),
}

#[derive(Debug)]
pub struct AodvRouter {
    me: NodeId,
    cfg: AodvConfig,
    own_seq: u32,
    rreq_counter: u32,
    routes: BTreeMap<NodeId, RouteEntry>,
    seen: SeenCache,
    buffer: DataBuffer,
    pending: BTreeMap<NodeId, PendingDiscovery>,
}

impl AodvRouter {
    pub fn new(me: NodeId, cfg: AodvConfig) -> Self {
        AodvRouter {
            me,
            seen: SeenCache::new(cfg.seen_retention, cfg.seen_capacity),
            buffer: DataBuffer::new(cfg.buffer_capacity),
            cfg,
            own_seq: 0,
            rreq_counter: 0,
            routes: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn rreq_counter(&self) -> u32 {
        self.rreq_counter
    }

    pub fn route(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.routes.get(&dest)
    }

    pub fn routes(&self) -> impl Iterator<Item = &RouteEntry> {
        self.routes.values()
    }

    pub fn valid_route(&self, dest: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.routes.get(&dest).filter(|r| r.is_valid(now))
    }

    pub fn best_route(&self, dest: NodeId, now: SimTime) -> Option<RouteView> {
        self.valid_route(dest, now).map(|r| RouteView {
            next_hop: r.next_hop,
            hop_count: r.hop_count,
            dest_seq: r.dest_seq,
            expires_at: r.expires_at,
        })
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    fn trace_route(&self, cx: &mut Ctx, dest: NodeId) {
        let Some(r) = self.routes.get(&dest) else {
            return;
        };
        let paths = if r.state == RouteState::Valid {
            vec![PathView {
                next_hop: r.next_hop,
                hop_count: r.hop_count,
                expires_at: r.expires_at,
            }]
        } else {
            Vec::new()
        };
        cx.record(Record::Route {
            t: cx.now,
            node: self.me,
            dest,
            seq: r.dest_seq,
            paths,
        });
    }

    fn drop_control(&self, cx: &mut Ctx, kind: PacketKind, reason: DropReason) {
        cx.record(Record::Drop {
            t: cx.now,
            node: self.me,
            kind,
            reason,
            penalized: None,
        });
    }

    /// Installs or improves the route to `dest`; returns whether it changed.
    ///
    /// Accepted when there is no entry, the sequence number is fresher, or it
    /// is equal and the old entry is unusable or longer.
    fn update_route(
        &mut self,
        cx: &mut Ctx,
        dest: NodeId,
        next_hop: NodeId,
        seq: u32,
        hop_count: u32,
        lifetime: SimTime,
    ) -> bool {
        let now = cx.now;
        let accept = match self.routes.get(&dest) {
            None => true,
            Some(old) => {
                seq > old.dest_seq
                    || (seq == old.dest_seq && (!old.is_valid(now) || hop_count < old.hop_count))
            }
        };
        if accept {
            self.routes.insert(
                dest,
                RouteEntry {
                    dest,
                    next_hop,
                    dest_seq: seq,
                    hop_count,
                    expires_at: now.saturating_add(lifetime),
                    state: RouteState::Valid,
                },
            );
            self.trace_route(cx, dest);
        }
        accept
    }

    fn refresh(&mut self, dest: NodeId, now: SimTime) {
        let lifetime = self.cfg.active_route_lifetime;
        if let Some(r) = self.routes.get_mut(&dest) {
            if r.is_valid(now) {
                r.expires_at = r.expires_at.max(now.saturating_add(lifetime));
            }
        }
    }

    pub fn originate_rreq(&mut self, cx: &mut Ctx, dest: NodeId) -> Result<(), RouteError> {
        if self.valid_route(dest, cx.now).is_some() {
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
        // The originator remembers its own request but does not count it as stored.
        self.seen.insert(ControlId::Rreq(id), cx.now);
        let msg = RreqMsg {
            id,
            origin_seq: self.own_seq,
            dest,
            dest_seq_known: self.routes.get(&dest).map(|r| r.dest_seq),
            hop_count: 1,
            ttl: self.cfg.ttl,
        };
        self.pending.insert(
            dest,
            PendingDiscovery {
                counter: id.counter,
                attempt,
            },
        );
        cx.timer(
            discovery_wait(self.cfg.net_traversal_time, attempt),
            Timer::Discovery {
                dest,
                counter: id.counter,
            },
        );
        cx.broadcast(Packet::Rreq(msg));
    }

    pub fn handle(&mut self, cx: &mut Ctx, packet: &Packet, from: NodeId) {
        match packet {
            Packet::Rreq(m) => {
                self.handle_rreq(cx, m, from);
            }
            Packet::Rrep(m) => {
                self.handle_rrep(cx, m, from);
            }
            Packet::Rerr(m) => {
                self.handle_rerr(cx, m, from);
            }
            Packet::Data(d) => {
                self.forward_data(cx, *d);
            }
            // HELLOs only refresh liveness, which the engine tracks.
            Packet::Hello(_) => {}
            Packet::Signed(s) => self.drop_control(cx, s.kind(), DropReason::Malformed),
        }
    }

    pub fn handle_rreq(&mut self, cx: &mut Ctx, m: &RreqMsg, from: NodeId) -> RreqOutcome {
        let now = cx.now;
        if !self.seen.insert(ControlId::Rreq(m.id), now) {
            self.drop_control(cx, PacketKind::Rreq, DropReason::Duplicate);
            return RreqOutcome::Drop(DropReason::Duplicate);
        }
        cx.record(Record::HfStore {
            t: now,
            node: self.me,
            id: ControlId::Rreq(m.id),
        });
        let origin = m.origin();
        self.update_route(cx, origin, from, m.origin_seq, m.hop_count, self.cfg.active_route_lifetime);

        if m.dest == self.me {
            self.own_seq = self.own_seq.max(m.dest_seq_known.unwrap_or(0));
            let rrep = RrepMsg {
                origin,
                dest: self.me,
                dest_seq: self.own_seq,
                hop_count: 1,
                lifetime: self.cfg.my_route_timeout,
            };
            cx.unicast(from, Packet::Rrep(rrep));
            return RreqOutcome::Reply;
        }

        if let Some(r) = self.valid_route(m.dest, now) {
            let fresh_enough = m.dest_seq_known.is_none_or(|k| r.dest_seq >= k);
            if fresh_enough && r.next_hop != from {
                let rrep = RrepMsg {
                    origin,
                    dest: m.dest,
                    dest_seq: r.dest_seq,
                    hop_count: r.hop_count + 1,
                    lifetime: r.expires_at.saturating_sub(now),
                };
                cx.unicast(from, Packet::Rrep(rrep));
                return RreqOutcome::Reply;
            }
        }

        if m.ttl <= 1 {
            self.drop_control(cx, PacketKind::Rreq, DropReason::Ttl);
            return RreqOutcome::Drop(DropReason::Ttl);
        }
        let mut fwd = m.clone();
        fwd.hop_count += 1;
        fwd.ttl -= 1;
        cx.broadcast(Packet::Rreq(fwd));
        RreqOutcome::Forward
    }

    pub fn handle_rrep(&mut self, cx: &mut Ctx, m: &RrepMsg, from: NodeId) -> RrepOutcome {
        let now = cx.now;
        if m.dest == self.me {
            self.drop_control(cx, PacketKind::Rrep, DropReason::Worse);
            return RrepOutcome::Drop(DropReason::Worse);
        }
        if !self.update_route(cx, m.dest, from, m.dest_seq, m.hop_count, m.lifetime) {
            self.drop_control(cx, PacketKind::Rrep, DropReason::Worse);
            return RrepOutcome::Drop(DropReason::Worse);
        }
        if m.origin == self.me {
            self.pending.remove(&m.dest);
            self.flush(cx, m.dest);
            return RrepOutcome::InstallOnly;
        }
        match self.valid_route(m.origin, now).map(|r| r.next_hop) {
            Some(next) => {
                self.refresh(m.origin, now);
                let mut fwd = m.clone();
                fwd.hop_count += 1;
                cx.unicast(next, Packet::Rrep(fwd));
                RrepOutcome::InstallAndForward
            }
            None => {
                self.drop_control(cx, PacketKind::Rrep, DropReason::NoReverseRoute);
                RrepOutcome::Drop(DropReason::NoReverseRoute)
            }
        }
    }

    fn flush(&mut self, cx: &mut Ctx, dest: NodeId) {
        for p in self.buffer.take_for(dest) {
            self.forward_data(cx, p);
        }
    }

    fn invalidate(&mut self, cx: &mut Ctx, dest: NodeId, seq_floor: u32) -> Option<(NodeId, u32)> {
        let now = cx.now;
        let r = self.routes.get_mut(&dest)?;
        if r.state != RouteState::Valid {
            return None;
        }
        let was_usable = r.is_valid(now);
        r.state = RouteState::Invalid;
        r.dest_seq = (r.dest_seq + 1).max(seq_floor);
        let entry = (dest, r.dest_seq);
        self.trace_route(cx, dest);
        was_usable.then_some(entry)
    }

    /// Invalidates every route through `dead` and announces the losses.
    pub fn handle_link_break(&mut self, cx: &mut Ctx, dead: NodeId) -> Option<RerrMsg> {
        let via: Vec<NodeId> = self
            .routes
            .values()
            .filter(|r| r.state == RouteState::Valid && r.next_hop == dead)
            .map(|r| r.dest)
            .collect();
        let unreachable: Vec<(NodeId, u32)> = via
            .into_iter()
            .filter_map(|d| self.invalidate(cx, d, 0))
            .collect();
        if unreachable.is_empty() {
            return None;
        }
        let rerr = RerrMsg { unreachable };
        cx.broadcast(Packet::Rerr(rerr.clone()));
        Some(rerr)
    }

    /// Invalidates routes that went through the RERR's sender and cascades.
    pub fn handle_rerr(&mut self, cx: &mut Ctx, m: &RerrMsg, from: NodeId) -> Vec<NodeId> {
        let affected: Vec<(NodeId, u32)> = m
            .unreachable
            .iter()
            .filter(|(d, _)| {
                self.routes
                    .get(d)
                    .is_some_and(|r| r.state == RouteState::Valid && r.next_hop == from)
            })
            .copied()
            .collect();
        let unreachable: Vec<(NodeId, u32)> = affected
            .into_iter()
            .filter_map(|(d, s)| self.invalidate(cx, d, s))
            .collect();
        let dests = unreachable.iter().map(|(d, _)| *d).collect();
        if !unreachable.is_empty() {
            cx.broadcast(Packet::Rerr(RerrMsg { unreachable }));
        }
        dests
    }

    pub fn forward_data(&mut self, cx: &mut Ctx, mut p: DataPacket) -> DataOutcome {
        let now = cx.now;
        if p.dst == self.me {
            cx.out.push(super::Output::Deliver(p));
            return DataOutcome::Delivered;
        }
        if let Some(next) = self.valid_route(p.dst, now).map(|r| r.next_hop) {
            if p.hops >= self.cfg.ttl {
                cx.drop_data(p, DropReason::HopLimit);
                return DataOutcome::Dropped(DropReason::HopLimit);
            }
            self.refresh(p.dst, now);
            p.hops += 1;
            cx.unicast(next, Packet::Data(p));
            return DataOutcome::NextHop(next);
        }
        if p.src == self.me {
            if let Some(evicted) = self.buffer.push(p) {
                cx.drop_data(evicted, DropReason::BufferOverflow);
            }
            if !self.pending.contains_key(&p.dst) {
                self.send_rreq(cx, p.dst, 0);
            }
            return DataOutcome::Buffered;
        }
        cx.drop_data(p, DropReason::NoRoute);
        let seq = self.routes.get(&p.dst).map_or(0, |r| r.dest_seq);
        cx.broadcast(Packet::Rerr(RerrMsg {
            unreachable: vec![(p.dst, seq)],
        }));
        DataOutcome::Dropped(DropReason::NoRoute)
    }

    pub fn on_timer(&mut self, cx: &mut Ctx, timer: Timer) {
        let Timer::Discovery { dest, counter } = timer else {
            return;
        };
        let Some(p) = self.pending.get(&dest).copied() else {
            return;
        };
        if p.counter != counter {
            return;
        }
        if self.valid_route(dest, cx.now).is_some() {
            self.pending.remove(&dest);
            self.flush(cx, dest);
            return;
        }
        if p.attempt < self.cfg.rreq_retries {
            self.send_rreq(cx, dest, p.attempt + 1);
        } else {
            self.pending.remove(&dest);
            for d in self.buffer.take_for(dest) {
                cx.drop_data(d, DropReason::DiscoveryFailed);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyCenter;
    use crate::kernel::fork_stream;
    use crate::routing::Output;

    struct Harness {
        keys: KeyCenter,
        neighbors: BTreeMap<NodeId, SimTime>,
        rng: crate::kernel::RandomStream,
        out: Vec<Output>,
        now: SimTime,
    }

    impl Harness {
        fn new() -> Self {
            Harness {
                keys: KeyCenter::new(),
                neighbors: BTreeMap::new(),
                rng: fork_stream(1, b"test"),
                out: Vec::new(),
                now: SimTime::from_secs(1),
            }
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

        fn sent(&mut self) -> Vec<(Option<NodeId>, Packet)> {
            self.out
                .drain(..)
                .filter_map(|o| match o {
                    Output::Send { to, packet } => Some((to, packet)),
                    _ => None,
                })
                .collect()
        }
    }

    fn rreq(origin: u32, counter: u32, dest: u32, hop: u32) -> RreqMsg {
        RreqMsg {
            id: RreqId {
                origin: NodeId(origin),
                counter,
            },
            origin_seq: counter,
            dest: NodeId(dest),
            dest_seq_known: None,
            hop_count: hop,
            ttl: 36 - hop,
        }
    }

    #[test]
    fn counters_advance_per_discovery() {
        let mut h = Harness::new();
        let mut r = AodvRouter::new(NodeId(0), AodvConfig::default());
        r.originate_rreq(&mut h.cx(0), NodeId(5)).unwrap();
        let sent = h.sent();
        let Packet::Rreq(m) = &sent[0].1 else { panic!() };
        assert_eq!(m.id.counter, 1);
        assert_eq!((m.hop_count, m.ttl), (1, 35));
        r.originate_rreq(&mut h.cx(0), NodeId(6)).unwrap();
        let sent = h.sent();
        let Packet::Rreq(m2) = &sent[0].1 else { panic!() };
        assert_eq!(m2.id.counter, 2);
        assert!(m2.origin_seq > m.origin_seq);
    }

    #[test]
    fn discovery_with_valid_route_is_refused() {
        let mut h = Harness::new();
        let mut r = AodvRouter::new(NodeId(0), AodvConfig::default());
        r.handle_rreq(&mut h.cx(0), &rreq(5, 1, 9, 1), NodeId(5));
        assert_eq!(
            r.originate_rreq(&mut h.cx(0), NodeId(5)),
            Err(RouteError::RouteAlreadyValid(NodeId(5)))
        );
    }

    #[test]
    fn destination_replies_and_duplicate_is_dropped() {
        let mut h = Harness::new();
        let mut b = AodvRouter::new(NodeId(1), AodvConfig::default());
        assert_eq!(b.handle_rreq(&mut h.cx(1), &rreq(0, 1, 1, 1), NodeId(0)), RreqOutcome::Reply);
        let sent = h.sent();
        assert_eq!(sent[0].0, Some(NodeId(0)));
        assert_eq!(
            b.handle_rreq(&mut h.cx(1), &rreq(0, 1, 1, 2), NodeId(2)),
            RreqOutcome::Drop(DropReason::Duplicate)
        );
        assert_eq!(b.route(NodeId(0)).unwrap().hop_count, 1);
    }

    #[test]
    fn intermediate_forwards_with_hop_and_ttl_adjusted() {
        let mut h = Harness::new();
        let mut b = AodvRouter::new(NodeId(1), AodvConfig::default());
        assert_eq!(b.handle_rreq(&mut h.cx(1), &rreq(0, 1, 2, 1), NodeId(0)), RreqOutcome::Forward);
        let sent = h.sent();
        let Packet::Rreq(f) = &sent[0].1 else { panic!() };
        assert_eq!((f.hop_count, f.ttl), (2, 34));
        assert_eq!(sent[0].0, None);
    }

    #[test]
    fn ttl_exhaustion_drops() {
        let mut h = Harness::new();
        let mut b = AodvRouter::new(NodeId(1), AodvConfig::default());
        let mut m = rreq(0, 1, 2, 35);
        m.ttl = 1;
        assert_eq!(b.handle_rreq(&mut h.cx(1), &m, NodeId(0)), RreqOutcome::Drop(DropReason::Ttl));
    }

    fn rrep(dest: u32, seq: u32, hop: u32, origin: u32) -> RrepMsg {
        RrepMsg {
            origin: NodeId(origin),
            dest: NodeId(dest),
            dest_seq: seq,
            hop_count: hop,
            lifetime: SimTime::from_secs(20),
        }
    }

    #[test]
    fn rrep_freshness_and_tie_break() {
        let mut h = Harness::new();
        let mut a = AodvRouter::new(NodeId(0), AodvConfig::default());
        assert_eq!(a.handle_rrep(&mut h.cx(0), &rrep(9, 5, 3, 0), NodeId(1)), RrepOutcome::InstallOnly);
        // Equal seq, longer: rejected.
        assert_eq!(
            a.handle_rrep(&mut h.cx(0), &rrep(9, 5, 4, 0), NodeId(2)),
            RrepOutcome::Drop(DropReason::Worse)
        );
        // Fresher seq wins even when longer.
        assert_eq!(a.handle_rrep(&mut h.cx(0), &rrep(9, 6, 7, 0), NodeId(2)), RrepOutcome::InstallOnly);
        assert_eq!(a.route(NodeId(9)).unwrap().next_hop, NodeId(2));
    }

    #[test]
    fn origin_buffers_then_flushes_on_reply() {
        let mut h = Harness::new();
        let mut a = AodvRouter::new(NodeId(0), AodvConfig::default());
        let d = DataPacket {
            uid: 1,
            flow: 0,
            src: NodeId(0),
            dst: NodeId(9),
            seq: 0,
            sent_at: h.now,
            payload_len: 512,
            hops: 0,
        };
        assert_eq!(a.forward_data(&mut h.cx(0), d), DataOutcome::Buffered);
        let rreqs = h.sent().into_iter().filter(|(_, p)| matches!(p, Packet::Rreq(_))).count();
        assert_eq!(rreqs, 1);
        a.handle_rrep(&mut h.cx(0), &rrep(9, 1, 2, 0), NodeId(1));
        let sent = h.sent();
        assert!(matches!(sent[0], (Some(NodeId(1)), Packet::Data(_))));
        assert_eq!(a.buffered(), 0);
    }

    #[test]
    fn buffer_overflow_evicts_oldest_as_drop() {
        let mut h = Harness::new();
        let mut a = AodvRouter::new(NodeId(0), AodvConfig::default());
        for uid in 0..65 {
            let d = DataPacket {
                uid,
                flow: 0,
                src: NodeId(0),
                dst: NodeId(9),
                seq: uid as u32,
                sent_at: h.now,
                payload_len: 512,
                hops: 0,
            };
            a.forward_data(&mut h.cx(0), d);
        }
        let drops: Vec<_> = h
            .out
            .iter()
            .filter_map(|o| match o {
                Output::DropData { packet, reason } => Some((packet.uid, *reason)),
                _ => None,
            })
            .collect();
        assert_eq!(drops, vec![(0, DropReason::BufferOverflow)]);
    }

    #[test]
    fn link_break_batches_and_rerr_cascades() {
        let mut h = Harness::new();
        let mut b = AodvRouter::new(NodeId(1), AodvConfig::default());
        assert!(b.handle_link_break(&mut h.cx(1), NodeId(2)).is_none());
        b.handle_rrep(&mut h.cx(1), &rrep(3, 1, 1, 1), NodeId(2));
        b.handle_rrep(&mut h.cx(1), &rrep(4, 1, 2, 1), NodeId(2));
        h.out.clear();
        let rerr = b.handle_link_break(&mut h.cx(1), NodeId(2)).unwrap();
        assert_eq!(rerr.unreachable.len(), 2);
        assert!(b.valid_route(NodeId(3), h.now).is_none());

        // Upstream node 0 routes to 4 through 1 and cascades the error.
        let mut a = AodvRouter::new(NodeId(0), AodvConfig::default());
        a.handle_rrep(&mut h.cx(0), &rrep(4, 1, 3, 0), NodeId(1));
        h.out.clear();
        assert_eq!(a.handle_rerr(&mut h.cx(0), &rerr, NodeId(1)), vec![NodeId(4)]);
        assert!(a.valid_route(NodeId(4), h.now).is_none());
        assert_eq!(a.route(NodeId(4)).unwrap().dest_seq, 2);
        assert!(matches!(h.sent()[0].1, Packet::Rerr(_)));
    }

    #[test]
    fn intermediate_without_route_drops_and_reports() {
        let mut h = Harness::new();
        let mut b = AodvRouter::new(NodeId(1), AodvConfig::default());
        let d = DataPacket {
            uid: 1,
            flow: 0,
            src: NodeId(0),
            dst: NodeId(9),
            seq: 0,
            sent_at: h.now,
            payload_len: 512,
            hops: 1,
        };
        assert_eq!(b.forward_data(&mut h.cx(1), d), DataOutcome::Dropped(DropReason::NoRoute));
        assert!(h.out.iter().any(|o| matches!(o, Output::Send { packet: Packet::Rerr(_), .. })));
    }
}
