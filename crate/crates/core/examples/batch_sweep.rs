//! A small batch: two seeds of a shortened 1000 m sweep, both protocols,
//! printed as CSV and as the mean/std comparison table.
//!
//! Run with `cargo run --release --example batch_sweep`.

use hsrp::batch;
use hsrp::routing::Protocol;
use hsrp::scenario::load_scenario;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/sweep_1000.scn");
    let mut sweep = load_scenario(path).expect("bundled scenario");
    sweep.duration_s = 30.0;
    if let Some(s) = &mut sweep.sweep {
        s.nodes = vec![20, 50];
        s.max_speed = vec![5.0];
    }

    let specs = batch::plan(&[sweep], &[Protocol::Aodv, Protocol::Hsrp], &[1, 2]);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let outcome = batch::run_batch(&specs, jobs, None).expect("worker pool");
    assert!(outcome.failures.is_empty());

    batch::write_csv(&outcome.rows, std::io::stdout()).unwrap();
    println!();
    print!("{}", batch::comparison_table(&batch::summarize(&outcome.rows)));
}
