//! Feeds interactions and neighbor reports into a trust table and prints
//! how the fused score and band evolve.
//!
//! Run with `cargo run --example trust_table`.

use hsrp::kernel::SimTime;
use hsrp::trust::{label_link, LinkQuality, Outcome, Report, ReportKind, TrustConfig, TrustTable};
use hsrp::NodeId;

fn main() {
    let me = NodeId(0);
    let peer = NodeId(5);
    let mut table = TrustTable::new(me, TrustConfig::default()).unwrap();
    println!("unknown peer        fused {:.4} ({:?})", table.fused(peer), table.class(peer));

    for i in 0..6 {
        table.record_interaction(peer, Outcome::Success).unwrap();
        println!("success #{}          fused {:.4} ({:?})", i + 1, table.fused(peer), table.class(peer));
    }
    for reporter in 1..=3 {
        let report = Report {
            reporter: NodeId(reporter),
            peer,
            score: 1.0,
            at: SimTime::from_secs(5),
        };
        table.ingest_report(ReportKind::Reputation, report).unwrap();
    }
    println!("three good reports  fused {:.4} ({:?})", table.fused(peer), table.class(peer));

    for i in 0..8 {
        table.record_interaction(peer, Outcome::Failure).unwrap();
        println!("failure #{}          fused {:.4} ({:?})", i + 1, table.fused(peer), table.class(peer));
    }

    let mut link = LinkQuality::default();
    for s in 0..6 {
        link.record_bypass(SimTime::from_secs(s));
    }
    println!(
        "link with {} bypasses in 10 s: {:?}",
        link.bypass_count(SimTime::from_secs(6), SimTime::from_secs(10)),
        label_link(&link, 5)
    );
}
