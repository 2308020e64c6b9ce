//! Paired-seed comparison on the 700 m baseline: AODV and HSRP, with and
//! without five blackholes.
//!
//! Run with `cargo run --release --example blackhole_comparison [seeds]`.

use hsrp::batch::{self, RunSpec};
use hsrp::routing::Protocol;
use hsrp::scenario::load_scenario;

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/baseline_700.scn");
    let scenario = load_scenario(path).expect("bundled scenario");

    println!("{:>4}  {:>10} {:>10} {:>10} {:>10}", "seed", "aodv", "aodv+bh", "hsrp", "hsrp+bh");
    for seed in 0..seeds {
        let mut pdr = Vec::new();
        for protocol in [Protocol::Aodv, Protocol::Hsrp] {
            for attack_on in [false, true] {
                let spec = RunSpec {
                    scenario: scenario.clone(),
                    protocol,
                    attack_on,
                    seed,
                };
                let (row, _) = batch::run_one(&spec, None).expect("run succeeds");
                pdr.push(row.pdr);
            }
        }
        println!("{seed:>4}  {:>10.4} {:>10.4} {:>10.4} {:>10.4}", pdr[0], pdr[1], pdr[2], pdr[3]);
    }
}
