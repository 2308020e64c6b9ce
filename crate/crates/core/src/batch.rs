//! Single runs and batch sweeps: CSV rows, per-cell summaries and the
//! comparison table.
//!
//! A batch is the cartesian product of (scenario variant, protocol,
//! attack toggle, seed). Every run is an isolated [`Simulation`]; results
//! are merged after all workers finish and sorted by
//! (scenario, nodes, area_w, area_h, max_speed, protocol, attack, seed),
//! so output does not depend on the worker count.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::metrics::MetricsReport;
use crate::routing::Protocol;
use crate::scenario::Scenario;
use crate::sim::Simulation;

/// One concrete run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub protocol: Protocol,
    pub attack_on: bool,
    pub seed: u64,
}

impl RunSpec {
    /// Attack label: the attacker kind, or `none`.
    pub fn attack_label(&self) -> String {
        match (&self.scenario.attack, self.attack_on) {
            (Some(a), true) => a.kind.to_string(),
            _ => "none".into(),
        }
    }

    /// File name of this run's trace.
    pub fn trace_name(&self) -> String {
        let s = &self.scenario;
        format!(
            "{}_n{}_v{}_{}_{}_s{}.trace",
            s.name,
            s.nodes,
            s.mobility.speed_max,
            self.protocol,
            self.attack_label(),
            self.seed
        )
    }
}

/// One CSV row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub protocol: Protocol,
    pub attack: String,
    pub seed: u64,
    pub nodes: usize,
    pub area_w: f64,
    pub area_h: f64,
    pub max_speed: f64,
    pub duration_s: f64,
    pub pdr: f64,
    pub throughput_bps: f64,
    pub avg_delay_s: f64,
    pub jitter_s: f64,
    pub overhead_ratio: f64,
    pub hf: u64,
    pub md: u64,
    pub rreq: u64,
    pub rrep: u64,
    pub rerr: u64,
    pub proactive: u64,
    pub hello: u64,
}

pub const CSV_COLUMNS: [&str; 21] = [
    "scenario",
    "protocol",
    "attack",
    "seed",
    "nodes",
    "area_w",
    "area_h",
    "max_speed",
    "duration_s",
    "pdr",
    "throughput_bps",
    "avg_delay_s",
    "jitter_s",
    "overhead_ratio",
    "hf",
    "md",
    "rreq",
    "rrep",
    "rerr",
    "proactive",
    "hello",
];

impl Row {
    pub fn new(spec: &RunSpec, r: &MetricsReport) -> Row {
        let s = &spec.scenario;
        let c = &r.counters;
        Row {
            scenario: s.name.clone(),
            protocol: spec.protocol,
            attack: spec.attack_label(),
            seed: spec.seed,
            nodes: s.nodes,
            area_w: s.area.width,
            area_h: s.area.height,
            max_speed: s.mobility.speed_max,
            duration_s: s.duration_s,
            pdr: r.pdr,
            throughput_bps: r.throughput_bps,
            avg_delay_s: r.avg_delay_s,
            jitter_s: r.jitter_s,
            overhead_ratio: r.overhead_ratio,
            hf: c.hf_count,
            md: c.md_count,
            rreq: c.rreq_tx,
            rrep: c.rrep_tx,
            rerr: c.rerr_tx,
            proactive: c.proactive_tx,
            hello: c.hello_tx,
        }
    }

    fn cell_cmp(&self, o: &Row) -> Ordering {
        self.scenario
            .cmp(&o.scenario)
            .then(self.nodes.cmp(&o.nodes))
            .then(self.area_w.total_cmp(&o.area_w))
            .then(self.area_h.total_cmp(&o.area_h))
            .then(self.max_speed.total_cmp(&o.max_speed))
            .then(self.protocol.cmp(&o.protocol))
            .then(self.attack.cmp(&o.attack))
    }

    /// The documented row order.
    pub fn sort_cmp(&self, o: &Row) -> Ordering {
        self.cell_cmp(o).then(self.seed.cmp(&o.seed))
    }
}

/// Runs one simulation, writing its trace to `trace` when given.
pub fn run_one(spec: &RunSpec, trace: Option<&Path>) -> Result<(Row, MetricsReport), SimError> {
    let cfg = spec.scenario.to_sim_config(spec.seed, spec.protocol, spec.attack_on);
    let mut sim = Simulation::new(cfg)?;
    if let Some(path) = trace {
        let file = File::create(path)?;
        sim.trace_to(Box::new(BufWriter::new(file)));
    }
    let report = sim.run()?;
    Ok((Row::new(spec, &report), report))
}

/// Every (variant, protocol, attack toggle, seed) combination. Scenarios
/// without attackers contribute attack-free runs only.
pub fn plan(scenarios: &[Scenario], protocols: &[Protocol], seeds: &[u64]) -> Vec<RunSpec> {
    let mut out = Vec::new();
    for s in scenarios {
        for variant in s.expand() {
            let toggles: &[bool] = if variant.has_attack() { &[false, true] } else { &[false] };
            for &protocol in protocols {
                for &attack_on in toggles {
                    for &seed in seeds {
                        out.push(RunSpec {
                            scenario: variant.clone(),
                            protocol,
                            attack_on,
                            seed,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub run: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    /// Successful runs, in the documented order.
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
}

/// Runs `specs` on `jobs` worker threads. Traces go to `trace_dir` when given.
pub fn run_batch(specs: &[RunSpec], jobs: usize, trace_dir: Option<&Path>) -> Result<BatchOutcome, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<(String, Result<Row, SimError>)> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let trace: Option<PathBuf> = trace_dir.map(|d| d.join(spec.trace_name()));
                (spec.trace_name(), run_one(spec, trace.as_deref()).map(|(row, _)| row))
            })
            .collect()
    });
    let mut outcome = BatchOutcome::default();
    for (run, result) in results {
        match result {
            Ok(row) => outcome.rows.push(row),
            Err(e) => outcome.failures.push(Failure {
                run,
                error: e.to_string(),
            }),
        }
    }
    outcome.rows.sort_by(Row::sort_cmp);
    outcome.failures.sort_by(|a, b| a.run.cmp(&b.run));
    Ok(outcome)
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    w.flush()
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<Row>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and standard deviation of every metric over one cell's seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: String,
    pub protocol: Protocol,
    pub attack: String,
    pub nodes: usize,
    pub area_w: f64,
    pub area_h: f64,
    pub max_speed: f64,
    pub runs: usize,
    pub pdr_mean: f64,
    pub pdr_std: f64,
    pub throughput_bps_mean: f64,
    pub throughput_bps_std: f64,
    pub avg_delay_s_mean: f64,
    pub avg_delay_s_std: f64,
    pub jitter_s_mean: f64,
    pub jitter_s_std: f64,
    pub overhead_ratio_mean: f64,
    pub overhead_ratio_std: f64,
    pub hf_mean: f64,
    pub md_mean: f64,
}

/// One summary per cell, in row order. `rows` must be sorted.
pub fn summarize(rows: &[Row]) -> Vec<CellSummary> {
    rows.chunk_by(|a, b| a.cell_cmp(b) == Ordering::Equal)
        .map(|cell| {
            let stat = |f: fn(&Row) -> f64| mean_std(&cell.iter().map(f).collect::<Vec<_>>());
            let first = &cell[0];
            let (pdr_mean, pdr_std) = stat(|r| r.pdr);
            let (throughput_bps_mean, throughput_bps_std) = stat(|r| r.throughput_bps);
            let (avg_delay_s_mean, avg_delay_s_std) = stat(|r| r.avg_delay_s);
            let (jitter_s_mean, jitter_s_std) = stat(|r| r.jitter_s);
            let (overhead_ratio_mean, overhead_ratio_std) = stat(|r| r.overhead_ratio);
            CellSummary {
                scenario: first.scenario.clone(),
                protocol: first.protocol,
                attack: first.attack.clone(),
                nodes: first.nodes,
                area_w: first.area_w,
                area_h: first.area_h,
                max_speed: first.max_speed,
                runs: cell.len(),
                pdr_mean,
                pdr_std,
                throughput_bps_mean,
                throughput_bps_std,
                avg_delay_s_mean,
                avg_delay_s_std,
                jitter_s_mean,
                jitter_s_std,
                overhead_ratio_mean,
                overhead_ratio_std,
                hf_mean: stat(|r| r.hf as f64).0,
                md_mean: stat(|r| r.md as f64).0,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(cells: &[CellSummary], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c).map_err(io::Error::other)?;
    }
    w.flush()
}

/// Human-readable table of the summaries.
pub fn comparison_table(cells: &[CellSummary]) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<14} {:>5} {:>6} {:>5} {:<9} {:>4}  {:>15}  {:>17}  {:>15}  {:>13}",
        "scenario", "nodes", "speed", "proto", "attack", "runs", "pdr", "throughput_bps", "delay_ms", "overhead"
    );
    for c in cells {
        let _ = writeln!(
            t,
            "{:<14} {:>5} {:>6} {:>5} {:<9} {:>4}  {:>7.4} ± {:<5.4}  {:>8.0} ± {:<6.0}  {:>6.2} ± {:<6.2}  {:>5.2} ± {:<5.2}",
            c.scenario,
            c.nodes,
            c.max_speed,
            c.protocol,
            c.attack,
            c.runs,
            c.pdr_mean,
            c.pdr_std,
            c.throughput_bps_mean,
            c.throughput_bps_std,
            c.avg_delay_s_mean * 1e3,
            c.avg_delay_s_std * 1e3,
            c.overhead_ratio_mean,
            c.overhead_ratio_std,
        );
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn tiny() -> Scenario {
        parse_scenario(
            "name = \"tiny\"\nnodes = 12\nduration_s = 12.0\n[area]\nwidth = 400.0\nheight = 400.0\n[traffic]\nflows = 3\n[attack]\nkind = \"blackhole\"\ncount = 2\n",
            "tiny",
        )
        .unwrap()
    }

    #[test]
    fn plan_counts_the_product() {
        let mut s = tiny();
        assert_eq!(plan(&[s.clone()], &[Protocol::Aodv, Protocol::Hsrp], &[1, 2, 3]).len(), 12);
        s.attack = None;
        let seeds: Vec<u64> = (0..10).collect();
        let runs = plan(&[s], &[Protocol::Aodv, Protocol::Hsrp], &seeds);
        assert_eq!(runs.len(), 20);
        let empty = crate::metrics::finalize(&Default::default(), crate::kernel::SimTime::from_secs(1), 8);
        let mut rows: Vec<Row> = runs.iter().map(|r| Row::new(r, &empty)).collect();
        rows.sort_by(Row::sort_cmp);
        assert_eq!(summarize(&rows).len(), 2);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let specs = plan(&[tiny()], &[Protocol::Aodv, Protocol::Hsrp], &[5, 6]);
        let mut one = Vec::new();
        write_csv(&run_batch(&specs, 1, None).unwrap().rows, &mut one).unwrap();
        let mut eight = Vec::new();
        write_csv(&run_batch(&specs, 8, None).unwrap().rows, &mut eight).unwrap();
        assert_eq!(one, eight);
        let header = String::from_utf8(one).unwrap();
        assert!(header.starts_with(&CSV_COLUMNS.join(",")));
    }

    #[test]
    fn csv_round_trips_rows() {
        let specs = plan(&[tiny()], &[Protocol::Hsrp], &[3]);
        let rows = run_batch(&specs, 2, None).unwrap().rows;
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[1.0, 2.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
