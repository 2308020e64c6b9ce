//! Command-line front end: single runs, batch sweeps and trace verification.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hsrp::batch::{self, RunSpec};
use hsrp::error::{ScenarioError, SimError};
use hsrp::routing::Protocol;
use hsrp::scenario::{load_scenario, Scenario};
use hsrp::trace::{self, Record};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(name = "hsrp", version, about = "Deterministic MANET simulator comparing AODV with hybrid secure routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Aodv,
    Hsrp,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::Aodv => Protocol::Aodv,
            ProtocolArg::Hsrp => Protocol::Hsrp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (every variant of a sweep) with one seed.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the scenario's master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the scenario's protocol.
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
        /// Defaults to the scenario's attack.enabled.
        #[arg(long, value_enum)]
        attack: Option<Toggle>,
        /// Freeze every node at its starting position.
        #[arg(long = "static")]
        motionless: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every scenario in a directory under both protocols, with and
    /// without attacks, for each seed.
    Batch {
        #[arg(long)]
        scenarios: PathBuf,
        /// A count `n` (seeds 0..n) or a comma-separated list.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write one trace per run.
        #[arg(long)]
        traces: bool,
    },
    /// Re-derive a trace's report and scan it for loops, bad signatures and
    /// trust-gate breaches.
    VerifyTrace { trace: PathBuf },
}

enum Failure {
    Validation(String),
    Run(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => Failure::Validation(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn io_failure(what: &Path, e: std::io::Error) -> Failure {
    Failure::Run(format!("{}: {e}", what.display()))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Validation(format!("--seeds expects a count or a comma-separated list, got {s:?}"));
    if s.contains(',') {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    } else {
        let n: u64 = s.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        Ok((0..n).collect())
    }
}

fn write_outputs(out: &Path, rows: &[batch::Row]) -> Result<(), Failure> {
    let path = out.join("results.csv");
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    batch::write_csv(rows, file).map_err(|e| io_failure(&path, e))?;
    let cells = batch::summarize(rows);
    let path = out.join("summary.csv");
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    batch::write_summary_csv(&cells, file).map_err(|e| io_failure(&path, e))?;
    print!("{}", batch::comparison_table(&cells));
    Ok(())
}

fn run(
    scenario: &Path,
    seed: Option<u64>,
    protocol: Option<ProtocolArg>,
    attack: Option<Toggle>,
    motionless: bool,
    out: &Path,
) -> Result<(), Failure> {
    let mut s: Scenario = load_scenario(scenario)?;
    if motionless {
        s = s.static_override();
    }
    let seed = seed.unwrap_or(s.master_seed);
    let protocol = protocol.map_or(s.protocol, Protocol::from);
    let attack_on = match attack {
        Some(Toggle::On) => {
            if !s.has_attack() {
                return Err(Failure::Validation(format!("{} defines no [attack] section", scenario.display())));
            }
            true
        }
        Some(Toggle::Off) => false,
        None => s.attack.as_ref().is_some_and(|a| a.enabled),
    };
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let mut rows = Vec::new();
    for variant in s.expand() {
        let spec = RunSpec {
            scenario: variant,
            protocol,
            attack_on,
            seed,
        };
        let trace = out.join(spec.trace_name());
        let (row, _) = batch::run_one(&spec, Some(&trace))?;
        eprintln!("wrote {}", trace.display());
        rows.push(row);
    }
    rows.sort_by(batch::Row::sort_cmp);
    write_outputs(out, &rows)
}

fn run_batch(dir: &Path, seeds: &str, jobs: usize, out: &Path, traces: bool) -> Result<(), Failure> {
    let seeds = parse_seeds(seeds)?;
    if jobs == 0 {
        return Err(Failure::Validation("--jobs must be at least 1".into()));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::Validation(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Validation(format!("no .scn files in {}", dir.display())));
    }
    let scenarios = paths.iter().map(load_scenario).collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let trace_dir = out.join("traces");
    if traces {
        fs::create_dir_all(&trace_dir).map_err(|e| io_failure(&trace_dir, e))?;
    }
    let specs = batch::plan(&scenarios, &[Protocol::Aodv, Protocol::Hsrp], &seeds);
    eprintln!("running {} simulations on {jobs} workers", specs.len());
    let outcome = batch::run_batch(&specs, jobs, traces.then_some(trace_dir.as_path()))?;
    write_outputs(out, &outcome.rows)?;
    if outcome.failures.is_empty() {
        return Ok(());
    }
    let path = out.join("failures.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Run(e.to_string()))?;
    w.write_record(["run", "error"]).map_err(|e| Failure::Run(e.to_string()))?;
    for f in &outcome.failures {
        eprintln!("run {} failed: {}", f.run, f.error);
        w.write_record([&f.run, &f.error]).map_err(|e| Failure::Run(e.to_string()))?;
    }
    w.flush().map_err(|e| io_failure(&path, e))?;
    Err(Failure::Run(format!("{} of {} runs failed", outcome.failures.len(), specs.len())))
}

fn verify(path: &Path) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let records: Vec<Record> =
        trace::read_trace(BufReader::new(file)).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let v = trace::verify_records(&records).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let h = trace::header(&records).expect("verified traces have a header");
    let attacked = h.attack != "none";
    let r = &v.recomputed;
    println!("trace      {} ({} protocol, attack {}, seed {})", h.scenario, h.protocol, h.attack, h.seed);
    println!("records    {}", records.len());
    println!(
        "report     pdr {:.4}  throughput {:.1} bps  delay {:.6} s  jitter {:.6} s  overhead {:.4}",
        r.pdr, r.throughput_bps, r.avg_delay_s, r.jitter_s, r.overhead_ratio
    );
    println!("matches    {}", if v.report_matches { "yes" } else { "NO" });
    println!(
        "loops      {}{}",
        v.loops.len(),
        if attacked && !v.loops.is_empty() { " (attackers advertise false routes; not counted)" } else { "" }
    );
    println!("signatures {} honest transmissions fail verification", v.signatures.len());
    println!("gate       {} selections of Bad next hops", v.gate.len());
    let loops_fail = !attacked && !v.loops.is_empty();
    if !v.report_matches || loops_fail || !v.signatures.is_empty() || !v.gate.is_empty() {
        for l in v.loops.iter().take(5) {
            println!("  loop at {} toward {}: {:?}", l.t, l.dest, l.cycle);
        }
        return Err(Failure::Run("trace verification failed".into()));
    }
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            protocol,
            attack,
            motionless,
            out,
        } => run(&scenario, seed, protocol, attack, motionless, &out),
        Command::Batch {
            scenarios,
            seeds,
            jobs,
            out,
            traces,
        } => run_batch(&scenarios, &seeds, jobs, &out, traces),
        Command::VerifyTrace { trace } => verify(&trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUN)
        }
    }
}
