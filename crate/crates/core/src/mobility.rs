//! Node placement, random-waypoint motion and disk connectivity.

use serde::{Deserialize, Serialize};

use crate::kernel::{RandomStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular simulation area anchored at the origin, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn sample(&self, stream: &mut RandomStream) -> Position {
        Position {
            x: stream.uniform(0.0, self.width),
            y: stream.uniform(0.0, self.height),
        }
    }
}

/// Random-waypoint parameters shared by every node in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    pub area: Area,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub current: Position,
    pub waypoint: Position,
    /// Meters per second.
    pub speed: f64,
    pub pause_until: SimTime,
}

impl MobilityState {
    /// A node that starts at `at`, heading for a fresh waypoint.
    pub fn start(at: Position, params: &WaypointParams, stream: &mut RandomStream) -> Self {
        MobilityState {
            current: at,
            waypoint: params.area.sample(stream),
            speed: stream.uniform(params.speed_min, params.speed_max),
            pause_until: SimTime::ZERO,
        }
    }

    /// A node that never moves.
    pub fn fixed(at: Position) -> Self {
        MobilityState {
            current: at,
            waypoint: at,
            speed: 0.0,
            pause_until: SimTime::ZERO,
        }
    }
}

/// `n` independent uniform positions inside `area`.
pub fn init_positions(n: usize, area: Area, stream: &mut RandomStream) -> Vec<Position> {
    (0..n).map(|_| area.sample(stream)).collect()
}

/// Advances one node by `dt` under the random-waypoint model.
///
/// `now` is the time at the start of the step. Reaching the waypoint starts
/// a pause; once the pause elapses a new waypoint and speed are drawn and
/// any remaining step time is spent moving toward it. A node sitting on its
/// waypoint is treated as arrived.
pub fn step_waypoint(
    state: MobilityState,
    now: SimTime,
    dt: SimTime,
    params: &WaypointParams,
    stream: &mut RandomStream,
) -> MobilityState {
    let mut s = state;
    let mut t = now;
    let end = now + dt;
    // Bounded so a zero-length leg cannot spin forever.
    for _ in 0..64 {
        if t >= end {
            break;
        }
        if s.current == s.waypoint {
            if s.pause_until > t {
                if s.pause_until >= end {
                    break;
                }
                t = s.pause_until;
            }
            s.waypoint = params.area.sample(stream);
            s.speed = stream.uniform(params.speed_min, params.speed_max);
            continue;
        }
        if s.speed <= 0.0 {
            break;
        }
        let remaining = s.current.distance(&s.waypoint);
        let budget = (end - t).as_secs_f64();
        let reach = s.speed * budget;
        if reach < remaining {
            let f = reach / remaining;
            s.current = Position {
                x: s.current.x + (s.waypoint.x - s.current.x) * f,
                y: s.current.y + (s.waypoint.y - s.current.y) * f,
            };
            break;
        }
        let travel = SimTime::from_secs_f64(remaining / s.speed);
        t = t.saturating_add(travel).min(end);
        s.current = s.waypoint;
        s.pause_until = t + params.pause;
    }
    s
}

/// Symmetric, irreflexive disk adjacency; `adj[i]` lists neighbors of `i` in id order.
pub fn neighbors(positions: &[Position], range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if in_range(&positions[i], &positions[j], range) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Boundary inclusive: a distance exactly equal to `range` connects.
pub fn in_range(a: &Position, b: &Position, range: f64) -> bool {
    a.distance(b) <= range
}
