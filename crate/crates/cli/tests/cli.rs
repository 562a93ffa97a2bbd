use std::path::Path;
use std::process::{Command, Output};

use stiga_cli::output::read_csv;

const TINY: &str = r#"
[geometry]
angular_elements = 8

[discretization]
degree = 2
elements = [8, 2]
time_elements = 16
final_time = 150.0

[output]
times = [0.0, 120.0]
grid = [9, 3]

[output.section]
from = [0.0, 0.5]
to = [1.0, 0.5]
samples = 11
time_samples = 5
"#;

fn stiga(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_stiga"))
        .args(args)
        .arg(&cfg)
        .arg("--output-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

#[test]
fn solve_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = stiga(&["solve"], TINY, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in ["report.json", "history.csv", "theta.csv", "section.csv", "snapshot_000.csv", "snapshot_001.vtk"] {
        assert!(o.join(f).exists(), "{f} missing");
    }
    let (header, rows) = read_csv(&o.join("snapshot_000.csv")).unwrap();
    assert_eq!(header, ["x", "y", "t", "u", "w", "theta"]);
    assert_eq!(rows.len(), 27);
    // nothing has happened yet at t = 0
    assert!(rows.iter().all(|r| r[3] == 0.0 && r[4] == 0.0));
    let (_, section) = read_csv(&o.join("section.csv")).unwrap();
    assert_eq!(section.len(), 55);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    // the echo carries defaults that the file did not set
    assert_eq!(report["config"]["problem"]["c1"], 0.26);
    assert_eq!(report["config"]["stabilization"]["epsilon"], 0.1);
    assert_eq!(report["results"]["converged"], true);
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(stiga(&["solve", "--threads", "1"], TINY, d.path()).status.success());
    }
    for f in ["history.csv", "theta.csv", "section.csv", "snapshot_001.csv"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn zero_source_compare_reports_zero_oscillation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{TINY}\n[source]\nkind = \"zero\"\n");
    let out = stiga(&["compare"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // the first column names the method
    let text = std::fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|c| c.parse().unwrap()).collect())
        .collect();
    let col = header.iter().position(|&h| h == "oscillation").unwrap() - 1;
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[col] == 0.0));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["[discretization]\ndegree = 0\n", "[nonsense]\n", "[solver]\nalpha = 2.0\n", "not toml"] {
        let out = stiga(&["solve"], bad, dir.path());
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_stiga"))
        .args(["solve", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{TINY}\n[solver]\nmax_iterations = 2\ndelta = 1e-14\n");
    let out = stiga(&["solve"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    // a regular file where the output directory should be
    std::fs::write(dir.path().join("out"), "").unwrap();
    let out = stiga(&["solve"], TINY, dir.path());
    assert_eq!(out.status.code(), Some(4));
}
