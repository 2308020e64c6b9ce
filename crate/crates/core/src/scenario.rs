//! Scenario files: a TOML schema describing one experiment (or a sweep of
//! them), validated on load and turned into [`SimConfig`]s.
//!
//! Unknown keys anywhere are rejected. Times are given in seconds. A minimal
//! file only needs `name`; every other key has a default:
//!
//! ```toml
//! name = "baseline_700"
//! nodes = 50
//! duration_s = 100.0
//!
//! [area]
//! width = 700.0
//! height = 700.0
//!
//! [mobility]
//! speed_min = 0.0
//! speed_max = 10.0
//!
//! [traffic]
//! flows = 10
//! packet_bytes = 512
//! data_rate_pps = 2.5   # packets per second per CBR flow
//!
//! [attack]
//! kind = "blackhole"
//! count = 5
//! ```
//!
//! A `[sweep]` table lists alternative node counts and maximum speeds; the
//! scenario expands to their cartesian product.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, FloodTarget};
use crate::channel::{ChannelConfig, JamRegion};
use crate::error::ScenarioError;
use crate::kernel::SimTime;
use crate::mobility::{Area, Position};
use crate::routing::{AodvConfig, HsrpConfig, Protocol};
use crate::sim::{AttackSetup, MobilityConfig, SimConfig, TrafficConfig};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "defaults::nodes")]
    pub nodes: usize,
    #[serde(default = "defaults::duration")]
    pub duration_s: f64,
    /// Protocol used by `run` when none is given on the command line.
    #[serde(default = "defaults::protocol")]
    pub protocol: Protocol,
    /// Seed used when none is given on the command line.
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub area: AreaSection,
    #[serde(default)]
    pub mobility: MobilitySection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(default)]
    pub aodv: AodvConfig,
    #[serde(default)]
    pub hsrp: HsrpConfig,
    /// Trust snapshot period in the trace; 0 disables it.
    #[serde(default = "defaults::snapshot")]
    pub trust_snapshot_s: f64,
    /// Fixed starting positions `[x, y]`, one per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

mod defaults {
    use crate::routing::Protocol;

    pub fn nodes() -> usize {
        50
    }
    pub fn duration() -> f64 {
        100.0
    }
    pub fn protocol() -> Protocol {
        Protocol::Aodv
    }
    pub fn snapshot() -> f64 {
        10.0
    }
    pub fn side() -> f64 {
        700.0
    }
    pub fn speed_max() -> f64 {
        10.0
    }
    pub fn step() -> f64 {
        0.1
    }
    pub fn flows() -> usize {
        10
    }
    pub fn packet_bytes() -> u32 {
        512
    }
    pub fn rate() -> f64 {
        2.5
    }
    pub fn traffic_start() -> f64 {
        2.0
    }
    pub fn drain() -> f64 {
        5.0
    }
    pub fn range() -> f64 {
        250.0
    }
    pub fn base_delay() -> f64 {
        0.002
    }
    pub fn jitter() -> f64 {
        0.001
    }
    pub fn attack_count() -> usize {
        5
    }
    pub fn until() -> f64 {
        f64::INFINITY
    }
    pub fn inflation() -> u32 {
        10_000
    }
    pub fn drop_fraction() -> f64 {
        0.5
    }
    pub fn flood_rate() -> f64 {
        20.0
    }
    pub fn jam_radius() -> f64 {
        100.0
    }
    pub fn yes() -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSection {
    #[serde(default = "defaults::side")]
    pub width: f64,
    #[serde(default = "defaults::side")]
    pub height: f64,
}

impl Default for AreaSection {
    fn default() -> Self {
        AreaSection {
            width: defaults::side(),
            height: defaults::side(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilitySection {
    #[serde(default)]
    pub speed_min: f64,
    #[serde(default = "defaults::speed_max")]
    pub speed_max: f64,
    #[serde(default)]
    pub pause_s: f64,
    /// Position update period.
    #[serde(default = "defaults::step")]
    pub step_s: f64,
}

impl Default for MobilitySection {
    fn default() -> Self {
        MobilitySection {
            speed_min: 0.0,
            speed_max: defaults::speed_max(),
            pause_s: 0.0,
            step_s: defaults::step(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub src: u32,
    pub dst: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    /// Random flows between honest pairs when `flow` is empty.
    #[serde(default = "defaults::flows")]
    pub flows: usize,
    #[serde(default = "defaults::packet_bytes")]
    pub packet_bytes: u32,
    /// "Data rate 2.5" read as CBR packets per second per flow.
    #[serde(default = "defaults::rate")]
    pub data_rate_pps: f64,
    #[serde(default = "defaults::traffic_start")]
    pub start_s: f64,
    /// Quiet period before the end of the run.
    #[serde(default = "defaults::drain")]
    pub drain_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flow: Vec<FlowSpec>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        TrafficSection {
            flows: defaults::flows(),
            packet_bytes: defaults::packet_bytes(),
            data_rate_pps: defaults::rate(),
            start_s: defaults::traffic_start(),
            drain_s: defaults::drain(),
            flow: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamSpec {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "defaults::range")]
    pub range: f64,
    #[serde(default)]
    pub loss_probability: f64,
    #[serde(default = "defaults::base_delay")]
    pub base_delay_s: f64,
    #[serde(default = "defaults::jitter")]
    pub jitter_s: f64,
    /// Always-on jammed disks, independent of attacker nodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jam: Vec<JamSpec>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            range: defaults::range(),
            loss_probability: 0.0,
            base_delay_s: defaults::base_delay(),
            jitter_s: defaults::jitter(),
            jam: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerSpec {
    pub id: u32,
    pub kind: AttackKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    /// Whether `run` enables the attack by default; batches sweep both.
    #[serde(default = "defaults::yes")]
    pub enabled: bool,
    /// Kind of the uniformly placed attackers.
    pub kind: AttackKind,
    /// Total attackers, listed ones included.
    #[serde(default = "defaults::attack_count")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub node: Vec<AttackerSpec>,
    #[serde(default)]
    pub active_from_s: f64,
    #[serde(default = "defaults::until", skip_serializing_if = "is_infinite")]
    pub active_until_s: f64,
    /// Blackhole sequence-number inflation.
    #[serde(default = "defaults::inflation")]
    pub inflation: u32,
    /// Blackholes sign replies under a victim's identity.
    #[serde(default)]
    pub masquerade: bool,
    /// Sinkhole data drop probability.
    #[serde(default = "defaults::drop_fraction")]
    pub drop_fraction: f64,
    /// Flooder Poisson rate, RREQs per second.
    #[serde(default = "defaults::flood_rate")]
    pub flood_rate: f64,
    /// Flood towards this node id instead of a nonexistent one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flood_target: Option<u32>,
    #[serde(default = "defaults::jam_radius")]
    pub jam_radius: f64,
}

fn is_infinite(v: &f64) -> bool {
    v.is_infinite()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub max_speed: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

fn check_secs(what: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be a finite, non-negative number of seconds")))
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses and validates scenario text; `origin` names it in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Renders the scenario back to TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario values are always representable")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name must be non-empty and contain no path separators"));
        }
        for variant in self.expand() {
            variant.validate_single()?;
        }
        Ok(())
    }

    fn validate_single(&self) -> Result<(), ScenarioError> {
        let n = self.nodes;
        if n < 2 {
            return Err(invalid(format!("nodes must be at least 2, got {n}")));
        }
        check_secs("duration_s", self.duration_s)?;
        if self.duration_s == 0.0 {
            return Err(invalid("duration_s must be positive"));
        }
        check_secs("trust_snapshot_s", self.trust_snapshot_s)?;
        let a = &self.area;
        if !(a.width.is_finite() && a.height.is_finite() && a.width > 0.0 && a.height > 0.0) {
            return Err(invalid("area width and height must be positive"));
        }
        let m = &self.mobility;
        check_secs("mobility.pause_s", m.pause_s)?;
        check_secs("mobility.step_s", m.step_s)?;
        if !(m.speed_min >= 0.0 && m.speed_max >= m.speed_min && m.speed_max.is_finite()) {
            return Err(invalid("mobility speeds must satisfy 0 <= speed_min <= speed_max"));
        }
        if m.speed_max > 0.0 && m.step_s == 0.0 {
            return Err(invalid("mobility.step_s must be positive for moving nodes"));
        }
        let t = &self.traffic;
        if !(t.data_rate_pps > 0.0 && t.data_rate_pps.is_finite()) {
            return Err(invalid("traffic.data_rate_pps must be positive"));
        }
        if t.packet_bytes == 0 {
            return Err(invalid("traffic.packet_bytes must be positive"));
        }
        check_secs("traffic.start_s", t.start_s)?;
        check_secs("traffic.drain_s", t.drain_s)?;
        let attackers: Vec<u32> = self.attack.iter().flat_map(|a| a.node.iter().map(|s| s.id)).collect();
        for f in &t.flow {
            if f.src as usize >= n || f.dst as usize >= n || f.src == f.dst {
                return Err(invalid(format!("flow {} -> {} must join two distinct nodes below {n}", f.src, f.dst)));
            }
            if attackers.contains(&f.src) || attackers.contains(&f.dst) {
                return Err(invalid(format!("flow {} -> {} has an attacker endpoint", f.src, f.dst)));
            }
        }
        let c = &self.channel;
        if !(c.range > 0.0 && c.range.is_finite()) {
            return Err(invalid("channel.range must be positive"));
        }
        if !(0.0..=1.0).contains(&c.loss_probability) {
            return Err(invalid("channel.loss_probability must lie in [0, 1]"));
        }
        check_secs("channel.base_delay_s", c.base_delay_s)?;
        check_secs("channel.jitter_s", c.jitter_s)?;
        if c.base_delay_s == 0.0 {
            return Err(invalid("channel.base_delay_s must be positive"));
        }
        if c.jam.iter().any(|j| !(j.radius >= 0.0)) {
            return Err(invalid("channel.jam radius must be non-negative"));
        }
        if let Some(att) = &self.attack {
            let mut seen = Vec::new();
            for s in &att.node {
                if s.id as usize >= n {
                    return Err(invalid(format!("attack node id {} is not below the node count {n}", s.id)));
                }
                if seen.contains(&s.id) {
                    return Err(invalid(format!("node {} carries more than one attack profile", s.id)));
                }
                seen.push(s.id);
            }
            if att.count < att.node.len() {
                return Err(invalid("attack.count is smaller than the listed attack nodes"));
            }
            if att.count + 2 > n {
                return Err(invalid(format!("{} attackers leave fewer than 2 honest nodes", att.count)));
            }
            check_secs("attack.active_from_s", att.active_from_s)?;
            if att.active_until_s.is_nan() || att.active_until_s < att.active_from_s {
                return Err(invalid("attack.active_until_s must not precede active_from_s"));
            }
            if !(0.0..=1.0).contains(&att.drop_fraction) {
                return Err(invalid("attack.drop_fraction must lie in [0, 1]"));
            }
            if !(att.flood_rate >= 0.0 && att.flood_rate.is_finite()) {
                return Err(invalid("attack.flood_rate must be non-negative"));
            }
            if att.flood_target.is_some_and(|t| t as usize >= n) {
                return Err(invalid("attack.flood_target must be a node id below the node count"));
            }
            if !(att.jam_radius >= 0.0) {
                return Err(invalid("attack.jam_radius must be non-negative"));
            }
        }
        if let Some(p) = &self.positions {
            if p.len() != n {
                return Err(invalid(format!("{} positions given for {n} nodes", p.len())));
            }
            let area = Area {
                width: a.width,
                height: a.height,
            };
            if p.iter().any(|[x, y]| !area.contains(&Position::new(*x, *y))) {
                return Err(invalid("every position must lie inside the area"));
            }
        }
        self.aodv.validate().map_err(invalid)?;
        self.hsrp.validate().map_err(invalid)
    }

    /// The concrete scenarios a sweep stands for (just `self` without one).
    pub fn expand(&self) -> Vec<Scenario> {
        let Some(sweep) = &self.sweep else {
            return vec![self.clone()];
        };
        let nodes = if sweep.nodes.is_empty() { vec![self.nodes] } else { sweep.nodes.clone() };
        let speeds = if sweep.max_speed.is_empty() {
            vec![self.mobility.speed_max]
        } else {
            sweep.max_speed.clone()
        };
        let mut out = Vec::new();
        for &n in &nodes {
            for &v in &speeds {
                let mut s = self.clone();
                s.sweep = None;
                s.nodes = n;
                s.mobility.speed_max = v;
                s.mobility.speed_min = s.mobility.speed_min.min(v);
                out.push(s);
            }
        }
        out
    }

    /// Same scenario with motionless nodes.
    pub fn static_override(&self) -> Scenario {
        let mut s = self.clone();
        s.mobility.speed_min = 0.0;
        s.mobility.speed_max = 0.0;
        if let Some(sw) = &mut s.sweep {
            sw.max_speed.clear();
        }
        s
    }

    /// Whether this scenario places attackers at all.
    pub fn has_attack(&self) -> bool {
        self.attack.is_some()
    }

    /// Configuration for one run of a concrete (non-sweep) scenario.
    pub fn to_sim_config(&self, seed: u64, protocol: Protocol, attack_on: bool) -> SimConfig {
        let secs = SimTime::from_secs_f64;
        let m = &self.mobility;
        let t = &self.traffic;
        let c = &self.channel;
        SimConfig {
            scenario: self.name.clone(),
            seed,
            nodes: self.nodes,
            duration: secs(self.duration_s),
            protocol,
            area: Area {
                width: self.area.width,
                height: self.area.height,
            },
            mobility: MobilityConfig {
                speed_min: m.speed_min,
                speed_max: m.speed_max,
                pause: secs(m.pause_s),
                step: secs(m.step_s),
            },
            channel: ChannelConfig {
                range: c.range,
                loss_probability: c.loss_probability,
                base_delay: secs(c.base_delay_s),
                jitter: secs(c.jitter_s),
                jam_regions: c
                    .jam
                    .iter()
                    .map(|j| JamRegion {
                        center: Position::new(j.x, j.y),
                        radius: j.radius,
                    })
                    .collect(),
            },
            traffic: TrafficConfig {
                flows: t.flows,
                packet_bytes: t.packet_bytes,
                rate_pps: t.data_rate_pps,
                start: secs(t.start_s),
                drain: secs(t.drain_s),
                explicit: t.flow.iter().map(|f| (NodeId(f.src), NodeId(f.dst))).collect(),
            },
            attacks: self.attack.as_ref().map(|a| AttackSetup {
                kind: a.kind,
                count: a.count,
                explicit: a.node.iter().map(|s| (NodeId(s.id), s.kind)).collect(),
                active_from: secs(a.active_from_s),
                active_until: if a.active_until_s.is_finite() {
                    secs(a.active_until_s)
                } else {
                    SimTime::MAX
                },
                inflation: a.inflation,
                masquerade: a.masquerade,
                drop_fraction: a.drop_fraction,
                flood_rate: a.flood_rate,
                flood_target: a.flood_target.map_or(FloodTarget::Nonexistent, |n| FloodTarget::Node(NodeId(n))),
                jam_radius: a.jam_radius,
            }),
            attack_on: attack_on && self.attack.is_some(),
            aodv: self.aodv.clone(),
            hsrp: self.hsrp.clone(),
            trust_snapshot: secs(self.trust_snapshot_s),
            positions: self
                .positions
                .as_ref()
                .map(|p| p.iter().map(|[x, y]| Position::new(*x, *y)).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = include_str!("../../../scenarios/baseline_700.scn");
    const SWEEP: &str = include_str!("../../../scenarios/sweep_1000.scn");

    #[test]
    fn baseline_matches_reference_setup() {
        let s = parse_scenario(BASELINE, "baseline_700.scn").unwrap();
        assert_eq!(s.nodes, 50);
        assert_eq!((s.area.width, s.area.height), (700.0, 700.0));
        assert_eq!((s.mobility.speed_min, s.mobility.speed_max), (0.0, 10.0));
        assert_eq!(s.attack.as_ref().unwrap().count, 5);
    }

    #[test]
    fn sweep_expands_to_the_grid() {
        let s = parse_scenario(SWEEP, "sweep_1000.scn").unwrap();
        let grid: Vec<(usize, f64)> = s.expand().iter().map(|v| (v.nodes, v.mobility.speed_max)).collect();
        assert_eq!(grid.len(), 9);
        for n in [20, 50, 100] {
            for v in [5.0, 10.0, 15.0] {
                assert!(grid.contains(&(n, v)));
            }
        }
        assert!(s.expand().iter().all(|v| v.area.width == 1000.0 && v.traffic.packet_bytes == 512));
    }

    #[test]
    fn bundled_scenarios_round_trip() {
        for text in [BASELINE, SWEEP] {
            let s = parse_scenario(text, "bundled").unwrap();
            let again = parse_scenario(&s.to_toml(), "rendered").unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn attacker_outside_node_range_is_rejected() {
        let text = "name = \"x\"\nnodes = 50\n[attack]\nkind = \"blackhole\"\nnode = [{ id = 60, kind = \"blackhole\" }]\n";
        let err = parse_scenario(text, "x").unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(m) if m.contains("60")));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse_scenario("name = \"x\"\n[mobility]\nspeed_mx = 3.0\n", "x").unwrap_err();
        match err {
            ScenarioError::Parse { message, .. } => {
                assert!(message.contains("speed_mx"), "{message}");
                assert!(message.contains("line 3"), "{message}");
            }
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn flows_must_avoid_attackers() {
        let text = "name = \"x\"\nnodes = 10\n[traffic]\nflow = [{ src = 1, dst = 2 }]\n[attack]\nkind = \"sinkhole\"\nnode = [{ id = 2, kind = \"sinkhole\" }]\n";
        assert!(matches!(parse_scenario(text, "x"), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn static_override_stops_motion() {
        let s = parse_scenario(BASELINE, "b").unwrap().static_override();
        let cfg = s.to_sim_config(1, Protocol::Hsrp, false);
        assert_eq!(cfg.mobility.speed_max, 0.0);
        assert!(!cfg.attack_on);
        assert!(cfg.attacks.is_some());
    }
}
