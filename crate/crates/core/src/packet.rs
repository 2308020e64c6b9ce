//! Packet types and their wire format.
//!
//! Every integer is big-endian; fields appear in declaration order. See
//! `docs/wire-format.md` for the byte layout. Data packets are encoded as
//! their header only: traces never carry payload bytes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{MultiSig, Signature};
use crate::kernel::SimTime;
use crate::trust::ReportKind;
use crate::NodeId;

/// Destination id no node ever owns; flooders address their requests to it.
pub const NONEXISTENT: NodeId = NodeId(u32::MAX);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RreqId {
    pub origin: NodeId,
    pub counter: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UpdateId {
    pub issuer: NodeId,
    pub counter: u32,
}

/// Key of control packets stored for duplicate suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlId {
    Rreq(RreqId),
    Update(UpdateId),
}

impl fmt::Display for ControlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlId::Rreq(id) => write!(f, "rreq:{}:{}", id.origin.0, id.counter),
            ControlId::Update(id) => write!(f, "upd:{}:{}", id.issuer.0, id.counter),
        }
    }
}

/// Hop counts in requests and replies count hops from the *receiver* to the
/// message's source: the originator of a request (or the destination that
/// answers it) sends 1, each forwarder adds 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RreqMsg {
    pub id: RreqId,
    pub origin_seq: u32,
    pub dest: NodeId,
    pub dest_seq_known: Option<u32>,
    pub hop_count: u32,
    pub ttl: u32,
}

impl RreqMsg {
    pub fn origin(&self) -> NodeId {
        self.id.origin
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrepMsg {
    pub origin: NodeId,
    pub dest: NodeId,
    pub dest_seq: u32,
    pub hop_count: u32,
    pub lifetime: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RerrMsg {
    pub unreachable: Vec<(NodeId, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelloReport {
    pub kind: ReportKind,
    pub peer: NodeId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Hello {
    pub reports: Vec<HelloReport>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProactiveUpdate {
    pub id: UpdateId,
    pub about_dest: NodeId,
    pub dest_seq: u32,
    pub advertised_hop_count: u32,
    pub issued_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignedInner {
    Rreq(RreqMsg),
    Rrep(RrepMsg),
    Update(ProactiveUpdate),
}

/// An HSRP control packet: the signers of `chain` are its hop list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedControlPacket {
    pub inner: SignedInner,
    pub chain: MultiSig,
}

impl SignedControlPacket {
    pub fn hop_list(&self) -> Vec<NodeId> {
        self.chain.signers().collect()
    }

    /// Bytes every signature in the chain commits to.
    ///
    /// Covers the immutable inner fields plus `hop_count - hops` (and for
    /// requests `ttl + hop_count`), which honest forwarding leaves unchanged;
    /// `hops` is the chain length once the signer being checked or added is
    /// included.
    pub fn canonical_bytes(&self, hops: usize) -> Vec<u8> {
        let hops = hops as u32;
        let mut out = Vec::with_capacity(48);
        match &self.inner {
            SignedInner::Rreq(m) => {
                out.extend_from_slice(b"HSRP-RREQ");
                put_u32(&mut out, m.id.origin.0);
                put_u32(&mut out, m.id.counter);
                put_u32(&mut out, m.origin_seq);
                put_u32(&mut out, m.dest.0);
                put_opt_u32(&mut out, m.dest_seq_known);
                put_u32(&mut out, m.hop_count.wrapping_sub(hops));
                put_u32(&mut out, m.ttl.wrapping_add(m.hop_count));
            }
            SignedInner::Rrep(m) => {
                out.extend_from_slice(b"HSRP-RREP");
                put_u32(&mut out, m.origin.0);
                put_u32(&mut out, m.dest.0);
                put_u32(&mut out, m.dest_seq);
                put_u64(&mut out, m.lifetime.as_micros());
                put_u32(&mut out, m.hop_count.wrapping_sub(hops));
            }
            SignedInner::Update(u) => {
                out.extend_from_slice(b"HSRP-UPDT");
                put_u32(&mut out, u.id.issuer.0);
                put_u32(&mut out, u.id.counter);
                put_u32(&mut out, u.about_dest.0);
                put_u32(&mut out, u.dest_seq);
                put_u32(&mut out, u.advertised_hop_count);
                put_u64(&mut out, u.issued_at.as_micros());
            }
        }
        out
    }

    pub fn kind(&self) -> PacketKind {
        match self.inner {
            SignedInner::Rreq(_) => PacketKind::Rreq,
            SignedInner::Rrep(_) => PacketKind::Rrep,
            SignedInner::Update(_) => PacketKind::Proactive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataPacket {
    pub uid: u64,
    pub flow: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u32,
    pub sent_at: SimTime,
    pub payload_len: u32,
    /// Hops travelled so far; bounds forwarding if routes ever disagree.
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    Hello(Hello),
    Rreq(RreqMsg),
    Rrep(RrepMsg),
    Rerr(RerrMsg),
    Signed(SignedControlPacket),
    Data(DataPacket),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Hello,
    Rreq,
    Rrep,
    Rerr,
    Proactive,
    Data,
}

impl PacketKind {
    pub fn is_control(self) -> bool {
        self != PacketKind::Data
    }
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Hello(_) => PacketKind::Hello,
            Packet::Rreq(_) => PacketKind::Rreq,
            Packet::Rrep(_) => PacketKind::Rrep,
            Packet::Rerr(_) => PacketKind::Rerr,
            Packet::Signed(s) => s.kind(),
            Packet::Data(_) => PacketKind::Data,
        }
    }

    pub fn control_id(&self) -> Option<ControlId> {
        match self {
            Packet::Rreq(m) => Some(ControlId::Rreq(m.id)),
            Packet::Signed(s) => match &s.inner {
                SignedInner::Rreq(m) => Some(ControlId::Rreq(m.id)),
                SignedInner::Update(u) => Some(ControlId::Update(u.id)),
                SignedInner::Rrep(_) => None,
            },
            _ => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        match self {
            Packet::Hello(h) => {
                out.push(TAG_HELLO);
                put_u16(&mut out, h.reports.len() as u16);
                for r in &h.reports {
                    out.push(match r.kind {
                        ReportKind::Reputation => 1,
                        ReportKind::Recommendation => 2,
                    });
                    put_u32(&mut out, r.peer.0);
                    put_u64(&mut out, r.score.to_bits());
                }
            }
            Packet::Rreq(m) => {
                out.push(TAG_RREQ);
                encode_rreq(m, &mut out);
            }
            Packet::Rrep(m) => {
                out.push(TAG_RREP);
                encode_rrep(m, &mut out);
            }
            Packet::Rerr(e) => {
                out.push(TAG_RERR);
                put_u16(&mut out, e.unreachable.len() as u16);
                for (d, s) in &e.unreachable {
                    put_u32(&mut out, d.0);
                    put_u32(&mut out, *s);
                }
            }
            Packet::Signed(s) => {
                out.push(TAG_SIGNED);
                match &s.inner {
                    SignedInner::Rreq(m) => {
                        out.push(TAG_RREQ);
                        encode_rreq(m, &mut out);
                    }
                    SignedInner::Rrep(m) => {
                        out.push(TAG_RREP);
                        encode_rrep(m, &mut out);
                    }
                    SignedInner::Update(u) => {
                        out.push(TAG_UPDATE);
                        put_u32(&mut out, u.id.issuer.0);
                        put_u32(&mut out, u.id.counter);
                        put_u32(&mut out, u.about_dest.0);
                        put_u32(&mut out, u.dest_seq);
                        put_u32(&mut out, u.advertised_hop_count);
                        put_u64(&mut out, u.issued_at.as_micros());
                    }
                }
                put_u16(&mut out, s.chain.len() as u16);
                s.chain.encode_prefix(s.chain.len(), &mut out);
            }
            Packet::Data(d) => {
                out.push(TAG_DATA);
                put_u64(&mut out, d.uid);
                put_u32(&mut out, d.flow);
                put_u32(&mut out, d.src.0);
                put_u32(&mut out, d.dst.0);
                put_u32(&mut out, d.seq);
                put_u64(&mut out, d.sent_at.as_micros());
                put_u32(&mut out, d.payload_len);
                put_u32(&mut out, d.hops);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Packet, DecodeError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let pkt = match r.u8()? {
            TAG_HELLO => {
                let n = r.u16()?;
                let mut reports = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let kind = match r.u8()? {
                        1 => ReportKind::Reputation,
                        2 => ReportKind::Recommendation,
                        t => return Err(DecodeError::BadTag(t)),
                    };
                    reports.push(HelloReport {
                        kind,
                        peer: NodeId(r.u32()?),
                        score: f64::from_bits(r.u64()?),
                    });
                }
                Packet::Hello(Hello { reports })
            }
            TAG_RREQ => Packet::Rreq(decode_rreq(&mut r)?),
            TAG_RREP => Packet::Rrep(decode_rrep(&mut r)?),
            TAG_RERR => {
                let n = r.u16()?;
                let mut unreachable = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    unreachable.push((NodeId(r.u32()?), r.u32()?));
                }
                Packet::Rerr(RerrMsg { unreachable })
            }
            TAG_SIGNED => {
                let inner = match r.u8()? {
                    TAG_RREQ => SignedInner::Rreq(decode_rreq(&mut r)?),
                    TAG_RREP => SignedInner::Rrep(decode_rrep(&mut r)?),
                    TAG_UPDATE => SignedInner::Update(ProactiveUpdate {
                        id: UpdateId {
                            issuer: NodeId(r.u32()?),
                            counter: r.u32()?,
                        },
                        about_dest: NodeId(r.u32()?),
                        dest_seq: r.u32()?,
                        advertised_hop_count: r.u32()?,
                        issued_at: SimTime(r.u64()?),
                    }),
                    t => return Err(DecodeError::BadTag(t)),
                };
                let n = r.u16()?;
                let mut entries = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let signer = NodeId(r.u32()?);
                    let len = r.u16()? as usize;
                    entries.push((signer, Signature(r.take(len)?.to_vec())));
                }
                Packet::Signed(SignedControlPacket {
                    inner,
                    chain: MultiSig::from_entries(entries),
                })
            }
            TAG_DATA => Packet::Data(DataPacket {
                uid: r.u64()?,
                flow: r.u32()?,
                src: NodeId(r.u32()?),
                dst: NodeId(r.u32()?),
                seq: r.u32()?,
                sent_at: SimTime(r.u64()?),
                payload_len: r.u32()?,
                hops: r.u32()?,
            }),
            t => return Err(DecodeError::BadTag(t)),
        };
        if r.pos != bytes.len() {
            return Err(DecodeError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(pkt)
    }
}

const TAG_HELLO: u8 = 0x01;
const TAG_RREQ: u8 = 0x02;
const TAG_RREP: u8 = 0x03;
const TAG_RERR: u8 = 0x04;
const TAG_SIGNED: u8 = 0x05;
const TAG_DATA: u8 = 0x06;
const TAG_UPDATE: u8 = 0x07;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unexpected end of packet")]
    Truncated,
    #[error("unknown tag 0x{0:02x}")]
    BadTag(u8),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_opt_u32(out: &mut Vec<u8>, v: Option<u32>) {
    out.push(u8::from(v.is_some()));
    put_u32(out, v.unwrap_or(0));
}

fn encode_rreq(m: &RreqMsg, out: &mut Vec<u8>) {
    put_u32(out, m.id.origin.0);
    put_u32(out, m.id.counter);
    put_u32(out, m.origin_seq);
    put_u32(out, m.dest.0);
    put_opt_u32(out, m.dest_seq_known);
    put_u32(out, m.hop_count);
    put_u32(out, m.ttl);
}

fn encode_rrep(m: &RrepMsg, out: &mut Vec<u8>) {
    put_u32(out, m.origin.0);
    put_u32(out, m.dest.0);
    put_u32(out, m.dest_seq);
    put_u32(out, m.hop_count);
    put_u64(out, m.lifetime.as_micros());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(DecodeError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2")))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4")))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8")))
    }
}

fn decode_rreq(r: &mut Reader<'_>) -> Result<RreqMsg, DecodeError> {
    let origin = NodeId(r.u32()?);
    let counter = r.u32()?;
    let origin_seq = r.u32()?;
    let dest = NodeId(r.u32()?);
    let known = r.u8()? != 0;
    let seq = r.u32()?;
    Ok(RreqMsg {
        id: RreqId { origin, counter },
        origin_seq,
        dest,
        dest_seq_known: known.then_some(seq),
        hop_count: r.u32()?,
        ttl: r.u32()?,
    })
}

fn decode_rrep(r: &mut Reader<'_>) -> Result<RrepMsg, DecodeError> {
    Ok(RrepMsg {
        origin: NodeId(r.u32()?),
        dest: NodeId(r.u32()?),
        dest_seq: r.u32()?,
        hop_count: r.u32()?,
        lifetime: SimTime(r.u64()?),
    })
}
