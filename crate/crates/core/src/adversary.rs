//! Attacker profiles layered over a node's honest router.
//!
//! An [`Adversary`] sees every packet its node receives before the router
//! does and may consume it ([`Adversary::intercept`]); it also rewrites what
//! the router sends ([`Adversary::rewrite`]). Attackers sign with their own
//! keys only: the engine never hands them anyone else's.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::crypto::{multisig_append, MultiSig, PrivateKey, Signature, SignatureScheme};
use crate::kernel::SimTime;
use crate::packet::{Packet, RrepMsg, RreqId, RreqMsg, SignedControlPacket, SignedInner, NONEXISTENT};
use crate::routing::{Ctx, DropReason, Output, Protocol, Router};
use crate::trace::Record;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Blackhole,
    Flooder,
    Sinkhole,
    Jammer,
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackKind::Blackhole => "blackhole",
            AttackKind::Flooder => "flooder",
            AttackKind::Sinkhole => "sinkhole",
            AttackKind::Jammer => "jammer",
        })
    }
}

/// What attack records in the trace describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackAction {
    ForgedRrep,
    Swallowed,
    Tampered,
    FakeUpdate,
    FloodRreq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloodTarget {
    Nonexistent,
    Node(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Behavior {
    /// Answers every request with a one-hop reply `inflation` past the best
    /// known sequence number, then drops whatever data it attracts. With
    /// `masquerade`, the reply claims the destination's identity in its chain.
    Blackhole { inflation: u32, masquerade: bool },
    /// Poisson-spaced requests at `rate` per second.
    Flooder { rate: f64, target: FloodTarget },
    /// Advertises one hop less and a sequence one higher than it has, and
    /// drops attracted data with probability `drop_fraction`.
    Sinkhole { drop_fraction: f64 },
    /// Owner of channel jamming region `region`.
    Jammer { region: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackProfile {
    pub behavior: Behavior,
    pub active_from: SimTime,
    pub active_until: SimTime,
}

impl AttackProfile {
    pub fn kind(&self) -> AttackKind {
        match self.behavior {
            Behavior::Blackhole { .. } => AttackKind::Blackhole,
            Behavior::Flooder { .. } => AttackKind::Flooder,
            Behavior::Sinkhole { .. } => AttackKind::Sinkhole,
            Behavior::Jammer { .. } => AttackKind::Jammer,
        }
    }

    /// Active on `[active_from, active_until)`.
    pub fn is_active(&self, now: SimTime) -> bool {
        self.active_from <= now && now < self.active_until
    }
}

/// First flooding request counter; keeps flood ids apart from discovery ids.
pub const FLOOD_COUNTER_BASE: u32 = 1_000_000;

#[derive(Debug)]
pub struct Adversary {
    me: NodeId,
    profile: AttackProfile,
    key: PrivateKey,
    protocol: Protocol,
    ttl: u32,
    reply_lifetime: SimTime,
    seen: BTreeSet<RreqId>,
    flood_counter: u32,
}

impl Adversary {
    pub fn new(
        me: NodeId,
        profile: AttackProfile,
        key: PrivateKey,
        protocol: Protocol,
        ttl: u32,
        reply_lifetime: SimTime,
    ) -> Self {
        Adversary {
            me,
            profile,
            key,
            protocol,
            ttl,
            reply_lifetime,
            seen: BTreeSet::new(),
            flood_counter: FLOOD_COUNTER_BASE,
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn profile(&self) -> &AttackProfile {
        &self.profile
    }

    fn attack(&self, cx: &mut Ctx, action: AttackAction, uid: Option<u64>) {
        cx.record(Record::Attack {
            t: cx.now,
            node: self.me,
            action,
            uid,
        });
    }

    /// Signs `inner` as a fresh one-entry chain under `claimed` identity.
    fn sign_as(&self, scheme: &dyn SignatureScheme, claimed: NodeId, inner: SignedInner) -> SignedControlPacket {
        let pkt = SignedControlPacket {
            inner,
            chain: MultiSig::new(),
        };
        let canonical = pkt.canonical_bytes(1);
        let chain = if claimed == self.me {
            multisig_append(&pkt.chain, self.me, &self.key, &canonical, scheme).expect("empty chain")
        } else {
            // The victim's key is out of reach, so the claim carries a signature
            // made with this node's own key.
            let mut msg = canonical;
            pkt.chain.encode_prefix(0, &mut msg);
            MultiSig::from_entries(vec![(claimed, scheme.sign(&self.key, &msg))])
        };
        SignedControlPacket { chain, ..pkt }
    }

    fn send_reply(&self, cx: &mut Ctx, to: NodeId, rrep: RrepMsg, claimed: NodeId) {
        let packet = match self.protocol {
            Protocol::Aodv => Packet::Rrep(rrep),
            Protocol::Hsrp => Packet::Signed(self.sign_as(cx.keys, claimed, SignedInner::Rrep(rrep))),
        };
        cx.unicast(to, packet);
        self.attack(cx, AttackAction::ForgedRrep, None);
    }

    /// Offers `packet` to the attacker first; `true` means it was consumed.
    pub fn intercept(&mut self, cx: &mut Ctx, router: &Router, packet: &Packet, from: NodeId) -> bool {
        if !self.profile.is_active(cx.now) {
            return false;
        }
        let rreq = match packet {
            Packet::Rreq(m) => Some(m),
            Packet::Signed(SignedControlPacket {
                inner: SignedInner::Rreq(m),
                ..
            }) => Some(m),
            _ => None,
        };
        match self.profile.behavior {
            Behavior::Blackhole { inflation, masquerade } => {
                if let Some(m) = rreq {
                    if m.origin() != self.me && m.dest != self.me && m.dest != NONEXISTENT && self.seen.insert(m.id) {
                        let best = router.known_seq(m.dest).max(m.dest_seq_known).unwrap_or(0);
                        let rrep = RrepMsg {
                            origin: m.origin(),
                            dest: m.dest,
                            dest_seq: best.saturating_add(inflation),
                            hop_count: 1,
                            lifetime: self.reply_lifetime,
                        };
                        let claimed = if masquerade { m.dest } else { self.me };
                        self.send_reply(cx, from, rrep, claimed);
                    }
                    return true;
                }
                if let Packet::Data(d) = packet {
                    if d.dst != self.me {
                        self.attack(cx, AttackAction::Swallowed, Some(d.uid));
                        cx.drop_data(*d, DropReason::Swallowed);
                        return true;
                    }
                }
                false
            }
            Behavior::Sinkhole { drop_fraction } => {
                if let Some(m) = rreq {
                    if self.seen.contains(&m.id) {
                        return true;
                    }
                    if m.origin() == self.me || m.dest == self.me {
                        return false;
                    }
                    if let Some(r) = router.best_route(m.dest, cx.now) {
                        self.seen.insert(m.id);
                        let rrep = RrepMsg {
                            origin: m.origin(),
                            dest: m.dest,
                            dest_seq: r.dest_seq.saturating_add(1),
                            hop_count: r.hop_count.max(1),
                            lifetime: self.reply_lifetime,
                        };
                        self.send_reply(cx, from, rrep, self.me);
                        return true;
                    }
                    return false;
                }
                if let Packet::Data(d) = packet {
                    if d.dst != self.me && cx.rng.unit() < drop_fraction {
                        self.attack(cx, AttackAction::Swallowed, Some(d.uid));
                        cx.drop_data(*d, DropReason::Swallowed);
                        return true;
                    }
                }
                false
            }
            Behavior::Flooder { .. } | Behavior::Jammer { .. } => false,
        }
    }

    /// Rewrites the outputs `cx.out[start..]` the honest router just produced.
    ///
    /// A sinkhole shaves a hop and bumps the sequence of replies it relays
    /// (without re-signing them) and of its own periodic updates (re-signed,
    /// so they verify).
    pub fn rewrite(&mut self, cx: &mut Ctx, start: usize) {
        if !self.profile.is_active(cx.now) || !matches!(self.profile.behavior, Behavior::Sinkhole { .. }) {
            return;
        }
        let mut actions = Vec::new();
        for o in cx.out[start..].iter_mut() {
            let Output::Send { packet, .. } = o else {
                continue;
            };
            match packet {
                Packet::Rrep(m) if m.dest != self.me && m.hop_count > 1 => {
                    m.hop_count -= 1;
                    m.dest_seq = m.dest_seq.saturating_add(1);
                    actions.push(AttackAction::Tampered);
                }
                Packet::Signed(s) => match &mut s.inner {
                    SignedInner::Rrep(m) if m.dest != self.me && s.chain.len() > 1 => {
                        m.hop_count = m.hop_count.saturating_sub(1).max(1);
                        m.dest_seq = m.dest_seq.saturating_add(1);
                        actions.push(AttackAction::Tampered);
                    }
                    SignedInner::Update(u) => {
                        u.advertised_hop_count = u.advertised_hop_count.saturating_sub(1).max(1);
                        u.dest_seq = u.dest_seq.saturating_add(1);
                        let resigned = self.sign_as(cx.keys, self.me, s.inner.clone());
                        *s = resigned;
                        actions.push(AttackAction::FakeUpdate);
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        for a in actions {
            self.attack(cx, a, None);
        }
    }

    /// One flooding request (a no-op unless this is an active flooder).
    pub fn flood(&mut self, cx: &mut Ctx) -> bool {
        let Behavior::Flooder { target, .. } = self.profile.behavior else {
            return false;
        };
        if !self.profile.is_active(cx.now) {
            return false;
        }
        self.flood_counter = self.flood_counter.wrapping_add(1);
        let dest = match target {
            FloodTarget::Nonexistent => NONEXISTENT,
            FloodTarget::Node(n) => n,
        };
        let m = RreqMsg {
            id: RreqId {
                origin: self.me,
                counter: self.flood_counter,
            },
            origin_seq: self.flood_counter,
            dest,
            dest_seq_known: None,
            hop_count: 1,
            ttl: self.ttl,
        };
        let packet = match self.protocol {
            Protocol::Aodv => Packet::Rreq(m),
            Protocol::Hsrp => Packet::Signed(self.sign_as(cx.keys, self.me, SignedInner::Rreq(m))),
        };
        cx.broadcast(packet);
        self.attack(cx, AttackAction::FloodRreq, None);
        true
    }

    /// Flooding rate, if this is a flooder.
    pub fn flood_rate(&self) -> Option<f64> {
        match self.profile.behavior {
            Behavior::Flooder { rate, .. } => Some(rate),
            _ => None,
        }
    }
}

/// The chain entry a masquerading reply carries, for tests and tooling.
pub fn claimed_signer(pkt: &SignedControlPacket) -> Option<(NodeId, &Signature)> {
    pkt.chain.entries().first().map(|(n, s)| (*n, s))
}
