//! Runs a short HSRP simulation with a sinkhole, writes its trace, reads it
//! back and re-derives the report with the trace scanners.
//!
//! Run with `cargo run --release --example verify_trace`.

use std::fs::File;
use std::io::BufReader;

use hsrp::adversary::AttackKind;
use hsrp::batch::{self, RunSpec};
use hsrp::routing::Protocol;
use hsrp::scenario::load_scenario;
use hsrp::trace;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/baseline_700.scn");
    let mut scenario = load_scenario(path).expect("bundled scenario");
    scenario.attack.as_mut().unwrap().kind = AttackKind::Sinkhole;
    scenario.duration_s = 30.0;

    let dir = tempfile::tempdir().unwrap();
    let spec = RunSpec {
        scenario,
        protocol: Protocol::Hsrp,
        attack_on: true,
        seed: 11,
    };
    let trace_path = dir.path().join(spec.trace_name());
    let (row, _) = batch::run_one(&spec, Some(&trace_path)).unwrap();
    println!("ran {} -> pdr {:.4}", spec.trace_name(), row.pdr);

    let records = trace::read_trace(BufReader::new(File::open(&trace_path).unwrap())).unwrap();
    let v = trace::verify_records(&records).unwrap();
    println!("{} records", records.len());
    println!("report re-derived exactly: {}", v.report_matches);
    println!("routing loops: {}", v.loops.len());
    println!("honest signed packets failing verification: {}", v.signatures.len());
    println!("Bad next hops selected: {}", v.gate.len());
    let watch = records.iter().filter(|r| matches!(r, trace::Record::Watchdog { .. })).count();
    let drops = records.iter().filter(|r| matches!(r, trace::Record::Drop { .. })).count();
    println!("watchdog verdicts: {watch}, protocol drops: {drops}");
}
