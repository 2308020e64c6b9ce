//! End-to-end checks of the command-line tool: outputs, exit codes and
//! agreement between the summary and the raw rows.

use std::fs;
use std::path::Path;
use std::process::Command;

use hsrp::batch::{read_csv, CSV_COLUMNS};

fn hsrp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hsrp"))
}

const TINY: &str = r#"
name = "tiny"
nodes = 15
duration_s = 15.0

[area]
width = 500.0
height = 500.0

[traffic]
flows = 4

[attack]
kind = "blackhole"
count = 2
"#;

fn write_tiny(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.scn");
    fs::write(&path, TINY).unwrap();
    path
}

#[test]
fn run_writes_row_and_verifiable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_tiny(dir.path());
    let out = dir.path().join("out");
    let status = hsrp()
        .args(["run", "--scenario"])
        .arg(&scn)
        .args(["--seed", "4", "--protocol", "hsrp", "--attack", "on", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 2);
    let trace = out.join("tiny_n15_v10_hsrp_blackhole_s4.trace");
    let verify = hsrp().arg("verify-trace").arg(&trace).output().unwrap();
    assert_eq!(verify.status.code(), Some(0), "{}", String::from_utf8_lossy(&verify.stdout));
}

#[test]
fn batch_summary_matches_raw_rows() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = dir.path().join("scenarios");
    fs::create_dir(&scenarios).unwrap();
    write_tiny(&scenarios);
    let out = dir.path().join("out");
    let status = hsrp()
        .args(["batch", "--scenarios"])
        .arg(&scenarios)
        .args(["--seeds", "1,2,3", "--jobs", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(fs::File::open(out.join("results.csv")).unwrap()).unwrap();
    // 2 protocols x 2 attack toggles x 3 seeds.
    assert_eq!(rows.len(), 12);

    let mut summary = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let headers = summary.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let cells: Vec<csv::StringRecord> = summary.records().map(Result::unwrap).collect();
    assert_eq!(cells.len(), 4);
    for cell in &cells {
        let members: Vec<f64> = rows
            .iter()
            .filter(|r| r.protocol.to_string() == cell[col("protocol")] && r.attack == cell[col("attack")])
            .map(|r| r.pdr)
            .collect();
        assert_eq!(members.len(), 3);
        let mean = members.iter().sum::<f64>() / 3.0;
        let recorded: f64 = cell[col("pdr_mean")].parse().unwrap();
        assert!((mean - recorded).abs() <= 1e-12 * mean.abs().max(1.0), "{mean} vs {recorded}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    fs::write(&bad, "name = \"bad\"\nnodes = 50\n[attack]\nkind = \"sinkhole\"\nnode = [{ id = 60, kind = \"sinkhole\" }]\n").unwrap();
    let code = |args: &[&str]| hsrp().args(args).output().unwrap().status.code();
    let out = dir.path().join("out");
    let (bad, out) = (bad.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(code(&["run", "--scenario", bad, "--seed", "1", "--out", out]), Some(2));
    assert_eq!(code(&["run", "--scenario", "/no/such/file.scn", "--seed", "1", "--out", out]), Some(2));
    assert_eq!(code(&["batch", "--scenarios", dir.path().to_str().unwrap(), "--seeds", "x", "--out", out]), Some(2));

    let garbage = dir.path().join("garbage.trace");
    fs::write(&garbage, "{\"ev\":\"nonsense\"}\n").unwrap();
    assert_eq!(code(&["verify-trace", garbage.to_str().unwrap()]), Some(2));

    // A trace whose end report was altered fails verification.
    let scn = write_tiny(dir.path());
    let run_out = dir.path().join("runs");
    assert_eq!(
        code(&["run", "--scenario", scn.to_str().unwrap(), "--seed", "2", "--attack", "off", "--out", run_out.to_str().unwrap()]),
        Some(0)
    );
    let trace = run_out.join("tiny_n15_v10_aodv_none_s2.trace");
    let text = fs::read_to_string(&trace).unwrap();
    let forged = text.replacen("\"hello_tx\":", "\"hello_tx\":1", 1);
    assert_ne!(forged, text);
    fs::write(&trace, forged).unwrap();
    assert_eq!(code(&["verify-trace", trace.to_str().unwrap()]), Some(3));

    assert_eq!(code(&["--version"]), Some(0));
}
