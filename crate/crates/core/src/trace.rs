//! Line-delimited JSON trace of one run, and the scanners that audit it.
//!
//! Every line is one [`Record`], tagged by `"ev"`. The first line is the
//! [`Header`] and the last is `end`, which carries the run's
//! [`MetricsReport`]. Control transmissions carry their wire bytes in hex
//! (see `docs/wire-format.md`); private keys never appear.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackAction, AttackKind};
use crate::crypto::{multisig_verify, KeyCenter};
use crate::kernel::SimTime;
use crate::metrics::{MetricsCollector, MetricsReport};
use crate::packet::{ControlId, Packet, PacketKind};
use crate::routing::{DropReason, Protocol};
use crate::trust::{LinkLabel, TrustClass};
use crate::NodeId;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub scenario: String,
    pub protocol: Protocol,
    /// `none` when the run is attack-free.
    pub attack: String,
    pub seed: u64,
    pub nodes: u32,
    pub duration: SimTime,
    pub payload_bytes: u32,
    pub attackers: Vec<AttackerInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerInfo {
    pub node: NodeId,
    pub kind: AttackKind,
    pub active_from: SimTime,
    pub active_until: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathView {
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub expires_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WatchOutcome {
    Success,
    Failure,
    /// The watched node announced it had no route, so no forward was due.
    Excused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Tx {
        t: SimTime,
        node: NodeId,
        kind: PacketKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<NodeId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uid: Option<u64>,
        /// Hex wire bytes, signed control packets only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wire: Option<String>,
    },
    DataOriginated {
        t: SimTime,
        uid: u64,
        flow: u32,
        src: NodeId,
        dst: NodeId,
    },
    DataDelivered {
        t: SimTime,
        uid: u64,
        flow: u32,
        delay: SimTime,
    },
    DataDropped {
        t: SimTime,
        node: NodeId,
        uid: u64,
        reason: DropReason,
    },
    HfStore {
        t: SimTime,
        node: NodeId,
        id: ControlId,
    },
    /// Full route state for `(node, dest)` after a change; no paths = invalid.
    Route {
        t: SimTime,
        node: NodeId,
        dest: NodeId,
        seq: u32,
        paths: Vec<PathView>,
    },
    /// A signature chain that failed verification.
    Verdict {
        t: SimTime,
        node: NodeId,
        from: NodeId,
        kind: PacketKind,
        at_index: usize,
    },
    Select {
        t: SimTime,
        node: NodeId,
        dest: NodeId,
        candidates: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chosen: Option<NodeId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<TrustClass>,
    },
    /// A peer's trust class changed in `node`'s table.
    Trust {
        t: SimTime,
        node: NodeId,
        peer: NodeId,
        fused: f64,
        class: TrustClass,
    },
    TrustSnapshot {
        t: SimTime,
        node: NodeId,
        peer: NodeId,
        engagement: f64,
        reputation: f64,
        recommendation: f64,
        fused: f64,
        class: TrustClass,
        link: LinkLabel,
    },
    Watchdog {
        t: SimTime,
        watcher: NodeId,
        target: NodeId,
        uid: u64,
        outcome: WatchOutcome,
    },
    Attack {
        t: SimTime,
        node: NodeId,
        action: AttackAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uid: Option<u64>,
    },
    Drop {
        t: SimTime,
        node: NodeId,
        kind: PacketKind,
        reason: DropReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        penalized: Option<NodeId>,
    },
    End {
        t: SimTime,
        report: MetricsReport,
    },
}

impl Record {
    /// Decodes the wire bytes of a control transmission.
    pub fn tx_packet(&self) -> Option<Packet> {
        match self {
            Record::Tx { wire: Some(w), .. } => Packet::decode(&hex::decode(w).ok()?).ok(),
            _ => None,
        }
    }
}

/// Writes records one per line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }

    pub fn write(&mut self, r: &Record) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, r)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace has no header line")]
    MissingHeader,
    #[error("trace has no end line")]
    MissingEnd,
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<Record>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn header(records: &[Record]) -> Option<&Header> {
    match records.first() {
        Some(Record::Header(h)) => Some(h),
        _ => None,
    }
}

/// A cycle of next-hop pointers toward `dest` at time `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopViolation {
    pub t: SimTime,
    pub dest: NodeId,
    pub cycle: Vec<NodeId>,
}

/// Replays route records and checks, after every change, that following
/// valid next hops from the changed node never revisits a node.
///
/// Any new cycle must pass through the entry that just changed, so checking
/// from that node alone finds every loop the trace makes visible. Entries are
/// valid until the expiry recorded with them.
pub fn scan_loops(records: &[Record]) -> Vec<LoopViolation> {
    let mut tables: BTreeMap<NodeId, BTreeMap<NodeId, Vec<PathView>>> = BTreeMap::new();
    let mut found = Vec::new();
    for r in records {
        let Record::Route { t, node, dest, paths, .. } = r else {
            continue;
        };
        tables.entry(*dest).or_default().insert(*node, paths.clone());
        let table = &tables[dest];
        if let Some(cycle) = find_cycle(table, *node, *dest, *t) {
            found.push(LoopViolation {
                t: *t,
                dest: *dest,
                cycle,
            });
        }
    }
    found
}

fn find_cycle(
    table: &BTreeMap<NodeId, Vec<PathView>>,
    start: NodeId,
    dest: NodeId,
    t: SimTime,
) -> Option<Vec<NodeId>> {
    // Iterative DFS with an explicit stack; `done` holds fully explored nodes.
    let mut done = BTreeSet::new();
    let mut on_stack: Vec<NodeId> = Vec::new();
    let mut frames: Vec<(NodeId, Vec<NodeId>)> = Vec::new();
    let next_of = |n: NodeId| -> Vec<NodeId> {
        table
            .get(&n)
            .map(|ps| {
                ps.iter()
                    .filter(|p| p.expires_at > t)
                    .map(|p| p.next_hop)
                    .collect()
            })
            .unwrap_or_default()
    };
    frames.push((start, next_of(start)));
    on_stack.push(start);
    while let Some((_, pending)) = frames.last_mut() {
        match pending.pop() {
            Some(n) if n == dest || done.contains(&n) => {}
            Some(n) => {
                if let Some(pos) = on_stack.iter().position(|x| *x == n) {
                    return Some(on_stack[pos..].to_vec());
                }
                frames.push((n, next_of(n)));
                on_stack.push(n);
            }
            None => {
                let (n, _) = frames.pop().expect("non-empty");
                on_stack.pop();
                done.insert(n);
            }
        }
    }
    None
}

/// A signed packet sent by an honest node whose chain does not verify.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignatureViolation {
    pub t: SimTime,
    pub node: NodeId,
    pub at_index: usize,
}

/// Re-verifies every signed control packet honest nodes transmitted.
///
/// `keys` must be the run's key center (see [`crate::sim::provision_keys`]).
pub fn scan_signatures(records: &[Record], keys: &KeyCenter) -> Vec<SignatureViolation> {
    let attackers: BTreeSet<NodeId> = header(records)
        .map(|h| h.attackers.iter().map(|a| a.node).collect())
        .unwrap_or_default();
    let mut found = Vec::new();
    for r in records {
        let Record::Tx { t, node, .. } = r else {
            continue;
        };
        if attackers.contains(node) {
            continue;
        }
        if let Some(Packet::Signed(s)) = r.tx_packet() {
            let canonical = s.canonical_bytes(s.chain.len());
            if let crate::crypto::ChainVerdict::Invalid { at_index } =
                multisig_verify(&s.chain, keys.directory(), &canonical, keys)
            {
                found.push(SignatureViolation {
                    t: *t,
                    node: *node,
                    at_index,
                });
            }
        }
    }
    found
}

/// A next hop chosen while the chooser classified it Bad.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateViolation {
    pub t: SimTime,
    pub node: NodeId,
    pub chosen: NodeId,
}

/// Replays trust class changes and checks every selection against them.
pub fn scan_gate(records: &[Record]) -> Vec<GateViolation> {
    let mut class: BTreeMap<(NodeId, NodeId), TrustClass> = BTreeMap::new();
    let mut found = Vec::new();
    for r in records {
        match r {
            Record::Trust { node, peer, class: c, .. } => {
                class.insert((*node, *peer), *c);
            }
            Record::Select {
                t,
                node,
                chosen: Some(chosen),
                class: recorded,
                ..
            } => {
                let replayed = class
                    .get(&(*node, *chosen))
                    .copied()
                    .unwrap_or(TrustClass::Neutral);
                if replayed == TrustClass::Bad || *recorded == Some(TrustClass::Bad) {
                    found.push(GateViolation {
                        t: *t,
                        node: *node,
                        chosen: *chosen,
                    });
                }
            }
            _ => {}
        }
    }
    found
}

/// Outcome of re-deriving a run's report and scanning its trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub recorded: MetricsReport,
    pub recomputed: MetricsReport,
    pub report_matches: bool,
    pub loops: Vec<LoopViolation>,
    pub signatures: Vec<SignatureViolation>,
    pub gate: Vec<GateViolation>,
}

impl VerifyOutcome {
    pub fn is_clean(&self) -> bool {
        self.report_matches && self.loops.is_empty() && self.signatures.is_empty() && self.gate.is_empty()
    }
}

/// Recomputes the metrics report from the records and runs all scanners.
pub fn verify_records(records: &[Record]) -> Result<VerifyOutcome, TraceError> {
    let h = header(records).ok_or(TraceError::MissingHeader)?;
    let recorded = records
        .iter()
        .rev()
        .find_map(|r| match r {
            Record::End { report, .. } => Some(report.clone()),
            _ => None,
        })
        .ok_or(TraceError::MissingEnd)?;
    let mut collector = MetricsCollector::default();
    for r in records {
        if !matches!(r, Record::End { .. }) {
            collector.observe(r);
        }
    }
    let recomputed = collector.report();
    // Bit-for-bit: compare the serialized forms, which is what the file holds.
    let report_matches = serde_json::to_string(&recorded).ok() == serde_json::to_string(&recomputed).ok();
    let (keys, _) = crate::sim::provision_keys(h.seed, h.nodes as usize).map_err(|e| TraceError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    Ok(VerifyOutcome {
        recorded,
        recomputed,
        report_matches,
        loops: scan_loops(records),
        signatures: scan_signatures(records, &keys),
        gate: scan_gate(records),
    })
}
