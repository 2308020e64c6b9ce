//! Five RREQ flooders against HSRP: counts how many of their requests each
//! honest node forwarded and checks them against the token bucket.
//!
//! Run with `cargo run --release --example flood_guard`.

use std::collections::{BTreeMap, BTreeSet};

use hsrp::adversary::AttackKind;
use hsrp::packet::{Packet, SignedInner};
use hsrp::routing::common::check_rate_bound;
use hsrp::routing::Protocol;
use hsrp::scenario::load_scenario;
use hsrp::sim::Simulation;
use hsrp::trace::Record;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/baseline_700.scn");
    let mut scenario = load_scenario(path).expect("bundled scenario");
    scenario.attack.as_mut().unwrap().kind = AttackKind::Flooder;
    scenario.duration_s = 30.0;

    let cfg = scenario.to_sim_config(1, Protocol::Hsrp, true);
    let (capacity, rate) = (cfg.hsrp.bucket_capacity, cfg.hsrp.bucket_rate);
    let mut sim = Simulation::new(cfg).unwrap();
    sim.record_in_memory();
    let report = sim.run().unwrap();

    let flooders: BTreeSet<_> = sim.attackers().iter().map(|(n, _)| *n).collect();
    let mut forwarded: BTreeMap<_, Vec<_>> = BTreeMap::new();
    let mut emitted = 0;
    for r in sim.records() {
        let Record::Tx { t, node, .. } = r else { continue };
        let Some(Packet::Signed(p)) = r.tx_packet() else { continue };
        let SignedInner::Rreq(q) = &p.inner else { continue };
        if !flooders.contains(&q.origin()) {
            continue;
        }
        if flooders.contains(node) {
            emitted += 1;
        } else {
            forwarded.entry((*node, q.origin())).or_default().push(*t);
        }
    }
    let total: usize = forwarded.values().map(Vec::len).sum();
    let breaches = forwarded.values().filter(|t| check_rate_bound(t, capacity, rate).is_some()).count();
    println!("flooders {flooders:?} emitted {emitted} requests in {} s", scenario.duration_s);
    println!("honest nodes forwarded {total} of them over {} (node, flooder) pairs", forwarded.len());
    println!("pairs exceeding the {capacity}-burst, {rate}/s bucket: {breaches}");
    println!("PDR {:.4}, overhead ratio {:.2}", report.pdr, report.overhead_ratio);
}
