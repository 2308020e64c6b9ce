//! Random-waypoint motion of a few nodes and how their neighborhoods change.
//!
//! Run with `cargo run --example mobility`.

use hsrp::kernel::{fork_stream, SimTime};
use hsrp::mobility::{init_positions, neighbors, step_waypoint, Area, MobilityState, WaypointParams};

fn main() {
    let params = WaypointParams {
        area: Area {
            width: 700.0,
            height: 700.0,
        },
        speed_min: 0.0,
        speed_max: 10.0,
        pause: SimTime::from_secs(2),
    };
    let mut stream = fork_stream(3, b"mobility");
    let mut nodes: Vec<MobilityState> = init_positions(6, params.area, &mut stream)
        .into_iter()
        .map(|p| MobilityState::start(p, &params, &mut stream))
        .collect();

    let step = SimTime::from_secs(10);
    let mut now = SimTime::ZERO;
    for _ in 0..6 {
        let positions: Vec<_> = nodes.iter().map(|n| n.current).collect();
        println!("t = {now}");
        for (i, (p, near)) in positions.iter().zip(neighbors(&positions, 250.0)).enumerate() {
            println!("  n{i} at ({:6.1}, {:6.1}) hears {near:?}", p.x, p.y);
        }
        for n in nodes.iter_mut() {
            *n = step_waypoint(*n, now, step, &params, &mut stream);
        }
        now = now + step;
    }
}
