//! Per-node trust tables.
//!
//! A peer's trust fuses three evidence sources:
//! - engagement `E`: Laplace-smoothed success ratio of direct interactions,
//!   `(successes + 1) / (successes + failures + 2)`;
//! - reputation `R`: mean of assessment reports other nodes sent about the peer;
//! - recommendation `C`: mean of observation reports from intermediaries.
//!
//! `fused = wE·E + wR·R + wC·C`, classified Bad `[0, 0.5)`, Neutral `[0.5, 0.8)`,
//! Good `[0.8, 1]`. Report lists keep the most recent `window` reports per
//! reporter; an empty list aggregates to the neutral 0.5.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::TrustError;
use crate::kernel::SimTime;
use crate::NodeId;

pub const BAD_BELOW: f64 = 0.5;
pub const GOOD_FROM: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustClass {
    Bad,
    Neutral,
    Good,
}

pub fn classify(fused: f64) -> TrustClass {
    if fused < BAD_BELOW {
        TrustClass::Bad
    } else if fused < GOOD_FROM {
        TrustClass::Neutral
    } else {
        TrustClass::Good
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Reputation,
    Recommendation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub reporter: NodeId,
    pub peer: NodeId,
    pub score: f64,
    pub at: SimTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngagementStats {
    pub successes: u64,
    pub failures: u64,
}

impl EngagementStats {
    pub fn score(&self) -> f64 {
        (self.successes as f64 + 1.0) / ((self.successes + self.failures) as f64 + 2.0)
    }
}

/// Fusion weights `(wE, wR, wC)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub engagement: f64,
    pub reputation: f64,
    pub recommendation: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            engagement: 0.5,
            reputation: 0.3,
            recommendation: 0.2,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), TrustError> {
        let w = [self.engagement, self.reputation, self.recommendation];
        let sum: f64 = w.iter().sum();
        if w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(TrustError::BadWeights(w));
        }
        Ok(())
    }
}

/// Reports about one peer, bounded per reporter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportWindow {
    by_reporter: BTreeMap<NodeId, VecDeque<(f64, SimTime)>>,
}

impl ReportWindow {
    fn push(&mut self, reporter: NodeId, score: f64, at: SimTime, window: usize) {
        let q = self.by_reporter.entry(reporter).or_default();
        q.push_back((score, at));
        while q.len() > window {
            q.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.by_reporter.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean of retained scores, 0.5 when empty.
    pub fn mean(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.5;
        }
        // Summed in reporter order so the result is independent of arrival interleaving.
        let sum: f64 = self
            .by_reporter
            .values()
            .flat_map(|q| q.iter().map(|(s, _)| *s))
            .sum();
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRecord {
    pub peer: NodeId,
    pub engagement: EngagementStats,
    pub reputation: ReportWindow,
    pub recommendation: ReportWindow,
    pub fused: f64,
    pub class: TrustClass,
}

impl TrustRecord {
    fn new(peer: NodeId) -> Self {
        TrustRecord {
            peer,
            engagement: EngagementStats::default(),
            reputation: ReportWindow::default(),
            recommendation: ReportWindow::default(),
            fused: 0.5,
            class: TrustClass::Neutral,
        }
    }

    pub fn components(&self) -> (f64, f64, f64) {
        (
            self.engagement.score(),
            self.reputation.mean(),
            self.recommendation.mean(),
        )
    }
}

pub fn fuse(record: &TrustRecord, weights: &Weights) -> Result<f64, TrustError> {
    weights.validate()?;
    let (e, r, c) = record.components();
    let fused = weights.engagement * e + weights.reputation * r + weights.recommendation * c;
    Ok(fused.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustConfig {
    pub weights: Weights,
    /// Reports retained per reporter.
    pub window: usize,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            weights: Weights::default(),
            window: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrustTable {
    owner: NodeId,
    config: TrustConfig,
    records: BTreeMap<NodeId, TrustRecord>,
}

impl TrustTable {
    pub fn new(owner: NodeId, config: TrustConfig) -> Result<Self, TrustError> {
        config.weights.validate()?;
        Ok(TrustTable {
            owner,
            config,
            records: BTreeMap::new(),
        })
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn record(&self, peer: NodeId) -> Option<&TrustRecord> {
        self.records.get(&peer)
    }

    pub fn records(&self) -> impl Iterator<Item = &TrustRecord> {
        self.records.values()
    }

    /// Fused score; unknown peers sit at the prior every fresh record starts with.
    pub fn fused(&self, peer: NodeId) -> f64 {
        self.records.get(&peer).map_or_else(
            || fuse(&TrustRecord::new(peer), &self.config.weights).unwrap_or(0.5),
            |r| r.fused,
        )
    }

    pub fn class(&self, peer: NodeId) -> TrustClass {
        classify(self.fused(peer))
    }

    fn entry(&mut self, peer: NodeId) -> &mut TrustRecord {
        self.records
            .entry(peer)
            .or_insert_with(|| TrustRecord::new(peer))
    }

    fn refresh(&mut self, peer: NodeId) {
        let weights = self.config.weights;
        let rec = self.entry(peer);
        rec.fused = fuse(rec, &weights).expect("weights validated at construction");
        rec.class = classify(rec.fused);
    }

    /// Returns the updated engagement score.
    pub fn record_interaction(&mut self, peer: NodeId, outcome: Outcome) -> Result<f64, TrustError> {
        if peer == self.owner {
            return Err(TrustError::SelfTrust(peer));
        }
        let rec = self.entry(peer);
        match outcome {
            Outcome::Success => rec.engagement.successes += 1,
            Outcome::Failure => rec.engagement.failures += 1,
        }
        let e = rec.engagement.score();
        self.refresh(peer);
        Ok(e)
    }

    /// Stores a report about `report.peer`.
    ///
    /// Returns `Ok(false)` when the report is ignored: reports about the owner
    /// itself, and reports from reporters this table currently classifies Bad.
    pub fn ingest_report(&mut self, kind: ReportKind, report: Report) -> Result<bool, TrustError> {
        if !(0.0..=1.0).contains(&report.score) {
            return Err(TrustError::ScoreOutOfRange(report.score));
        }
        if report.reporter == report.peer {
            return Err(TrustError::SelfReport(report.reporter));
        }
        if report.peer == self.owner
            || (report.reporter != self.owner && self.class(report.reporter) == TrustClass::Bad)
        {
            return Ok(false);
        }
        let window = self.config.window;
        let rec = self.entry(report.peer);
        let list = match kind {
            ReportKind::Reputation => &mut rec.reputation,
            ReportKind::Recommendation => &mut rec.recommendation,
        };
        list.push(report.reporter, report.score, report.at, window);
        self.refresh(report.peer);
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkLabel {
    Strong,
    Normal,
    Weak,
}

/// Bypass events on one link inside a sliding time window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkQuality {
    events: VecDeque<SimTime>,
}

impl LinkQuality {
    pub fn record_bypass(&mut self, at: SimTime) {
        self.events.push_back(at);
    }

    /// Drops events older than `window` before `now` and returns the count.
    pub fn bypass_count(&mut self, now: SimTime, window: SimTime) -> usize {
        let cutoff = now.saturating_sub(window);
        while self.events.front().is_some_and(|t| *t < cutoff) {
            self.events.pop_front();
        }
        self.events.len()
    }

    pub fn with_count(n: usize) -> Self {
        LinkQuality {
            events: std::iter::repeat_n(SimTime::ZERO, n).collect(),
        }
    }

    pub fn current_count(&self) -> usize {
        self.events.len()
    }
}

pub fn label_link(quality: &LinkQuality, threshold: usize) -> LinkLabel {
    match quality.current_count() {
        0 => LinkLabel::Strong,
        n if n < threshold.max(1) => LinkLabel::Normal,
        _ => LinkLabel::Weak,
    }
}
