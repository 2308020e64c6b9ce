//! Discovers a route along a five-node chain with both protocols and prints
//! the routes every node installs.
//!
//! Run with `cargo run --example aodv_chain`.

use hsrp::kernel::SimTime;
use hsrp::mobility::{Area, Position};
use hsrp::routing::Protocol;
use hsrp::sim::{MobilityConfig, SimConfig, Simulation};
use hsrp::NodeId;

fn main() {
    // 200 m spacing with a 250 m range: each node only hears its neighbors.
    let positions: Vec<Position> = (0..5).map(|i| Position::new(50.0 + 200.0 * i as f64, 50.0)).collect();
    for protocol in [Protocol::Aodv, Protocol::Hsrp] {
        let cfg = SimConfig {
            nodes: positions.len(),
            protocol,
            duration: SimTime::from_secs(10),
            area: Area {
                width: 1_000.0,
                height: 100.0,
            },
            mobility: MobilityConfig {
                speed_max: 0.0,
                ..Default::default()
            },
            positions: Some(positions.clone()),
            ..Default::default()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.start(false).unwrap();
        sim.schedule_discovery(NodeId(0), NodeId(4), SimTime::from_secs(1)).unwrap();
        sim.run_until(SimTime::from_secs(3)).unwrap();

        println!("{protocol}: n0 looks for n4");
        for i in 0..5 {
            let node = NodeId(i);
            let mut line = format!("  {node}:");
            for dest in [NodeId(0), NodeId(4)] {
                if let Some(r) = sim.router(node).best_route(dest, sim.now()) {
                    line += &format!("  to {dest} via {} ({} hops, seq {})", r.next_hop, r.hop_count, r.dest_seq);
                }
            }
            println!("{line}");
        }
        let c = sim.counters();
        println!("  control frames: {} RREQ, {} RREP, HF {}", c.rreq_tx, c.rrep_tx, c.hf_count);
    }
}
