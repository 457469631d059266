use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FIGURE1: &str = "# eight vertices, twelve edges\n\
1 2\n2 3\n2 4\n2 5\n2 7\n3 4\n3 5\n4 5\n4 6\n4 8\n5 6\n7 8\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cliqueloc"))
}

fn fixture() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("fig1.edges");
    fs::write(&path, FIGURE1).unwrap();
    (dir, path)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_one_line_failure(out: &Output) {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "{err:?}");
    assert!(err.starts_with("error: "));
    assert!(out.stdout.is_empty());
}

#[test]
fn cliques_lists_six() {
    let (_d, g) = fixture();
    let out = run(&["cliques", s(&g)]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "1 2\n2 7\n4 8\n7 8\n4 5 6\n2 3 4 5\n"
    );
    let v = ok_json(&["cliques", s(&g), "--json"]);
    assert_eq!(v["count"], 6);
    assert_eq!(v["graph"]["vertices"].as_array().unwrap().len(), 8);
}

#[test]
fn dsets_reports_partition() {
    let (_d, g) = fixture();
    let v = ok_json(&["dsets", s(&g), "--clique", "1,2"]);
    assert_eq!(v["partition_valid"], true);
    assert_eq!(v["d_sets"][0], serde_json::json!([3, 4, 5, 7, 6, 8]));
    assert_eq!(v["d_sets"][1], serde_json::json!([]));
    assert_one_line_failure(&run(&["dsets", s(&g), "--clique", "4,5"]));
}

#[test]
fn final_clique_ordering() {
    let (_d, g) = fixture();
    let v = ok_json(&[
        "final-clique",
        s(&g),
        "--alpha",
        "2",
        "--beta",
        "1",
        "--counts",
        "5:3,6:2",
    ]);
    assert_eq!(v["clique"], serde_json::json!([5, 6, 4]));
    let v = ok_json(&[
        "final-clique",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--tie",
        "rand:3",
    ]);
    assert_eq!(v["tie"], "rand:3");
}

#[test]
fn simulate_is_byte_identical() {
    let (d, g) = fixture();
    let a = d.path().join("a.csv");
    let b = d.path().join("b.csv");
    for p in [&a, &b] {
        let v = ok_json(&[
            "simulate",
            s(&g),
            "--alpha",
            "1",
            "--beta",
            "0.5",
            "--steps",
            "2000",
            "--seed",
            "7",
            "--out",
            s(p),
        ]);
        assert_eq!(v["seed"], 7);
    }
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("step,vertex\n1,"));
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn simulate_state_csv() {
    let (d, g) = fixture();
    let st = d.path().join("state.csv");
    let out = run(&[
        "simulate",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--steps",
        "10",
        "--seed",
        "1",
        "--x0",
        "4:2",
        "--state-out",
        s(&st),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&st).unwrap();
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 12);
}

#[test]
fn localize_independent_of_jobs() {
    let (_d, g) = fixture();
    let args = |jobs: &'static str| {
        run(&[
            "localize",
            s(&g),
            "--alpha",
            "1",
            "--beta",
            "1",
            "--steps",
            "800",
            "--replicas",
            "16",
            "--seed",
            "3",
            "--jobs",
            jobs,
        ])
    };
    let one = args("1");
    let four = args("4");
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let v: Value = serde_json::from_slice(&one.stdout).unwrap();
    assert_eq!(v["replicas"], 16);
    assert_eq!(v["per_replica"].as_array().unwrap().len(), 16);
    let agg = &v["aggregate"];
    let total: f64 = agg["maximal_cliques"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["frequency"].as_f64().unwrap())
        .sum::<f64>()
        + agg["single_vertex"]["frequency"].as_f64().unwrap()
        + agg["undecided"]["frequency"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn localize_writes_traces() {
    let (d, g) = fixture();
    let traces = d.path().join("traces");
    let report = d.path().join("report.json");
    let out = run(&[
        "localize",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--steps",
        "400",
        "--replicas",
        "3",
        "--seed",
        "1",
        "--traces",
        s(&traces),
        "--out",
        s(&report),
        "--trace-every",
        "50",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    for r in 0..3 {
        let text = fs::read_to_string(traces.join(format!("replica_{r}.csv"))).unwrap();
        assert!(text.starts_with("n,v,u,ratio\n"));
    }
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["command"], "localize");
}

#[test]
fn exact_modes() {
    let (_d, g) = fixture();
    let v = ok_json(&[
        "exact",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--clique",
        "4,5,6",
        "--horizon",
        "5",
    ]);
    assert_eq!(v["operation"], "confinement_prob");
    assert_eq!(v["certified_bound"], false);
    assert!(v["tail_tol"].is_null());
    assert_eq!(v["profile"].as_array().unwrap().len(), 6);
    let v = ok_json(&[
        "exact",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "2",
        "--clique",
        "1,2",
        "--horizon",
        "4",
        "--mode",
        "q",
        "--paths",
    ]);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["masses"].as_array().unwrap().len(), 16);
    // vertex 1 carries the largest rate, so (4,5,6) is not final
    assert_one_line_failure(&run(&[
        "exact",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--clique",
        "4,5,6",
        "--horizon",
        "3",
        "--mode",
        "q",
        "--x0",
        "1:3",
    ]));
    assert_one_line_failure(&run(&[
        "exact",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--clique",
        "2,3,4,5",
        "--horizon",
        "40",
        "--budget",
        "100",
    ]));
}

#[test]
fn bounds_values() {
    let v = ok_json(&["bounds", "--vertices", "2", "--alpha", "1", "--m", "2"]);
    assert!((v["results"][0]["value"].as_f64().unwrap() - 0.152).abs() < 5e-4);
    let v = ok_json(&[
        "bounds",
        "--vertices",
        "8",
        "--alpha",
        "1",
        "--beta",
        "0.5",
        "--m",
        "2",
        "--horizon",
        "10",
    ]);
    let ops: Vec<&str> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["operation"].as_str().unwrap())
        .collect();
    assert_eq!(
        ops,
        [
            "epsilon",
            "confinement_floor",
            "epsilon_n",
            "single_vertex_bound"
        ]
    );
    assert_one_line_failure(&run(&[
        "bounds",
        "--vertices",
        "8",
        "--alpha",
        "1",
        "--beta",
        "2",
        "--m",
        "2",
    ]));
}

#[test]
fn zchain_and_drift() {
    let v = ok_json(&[
        "zchain", "--m", "3", "--alpha", "1", "--beta", "2", "--steps", "20000", "--seed", "5",
    ]);
    assert!(v["return_stats"]["returns"].as_u64().unwrap() > 10);
    let v = ok_json(&[
        "drift", "--m", "3", "--alpha", "1", "--beta", "2", "--shell", "20:30",
    ]);
    assert!(v["max_drift"].as_f64().unwrap() < 0.0);
    assert!((v["drift_at_origin"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    let v = ok_json(&[
        "drift", "--m", "3", "--alpha", "1", "--beta", "2", "--shell", "auto",
    ]);
    assert!(v["max_drift"].as_f64().unwrap() <= -0.1);
    assert_one_line_failure(&run(&[
        "drift", "--m", "3", "--alpha", "2", "--beta", "1", "--shell", "1:2",
    ]));
}

#[test]
fn parse_errors_are_one_line_with_position() {
    let d = TempDir::new().unwrap();
    let bad = d.path().join("bad.edges");
    fs::write(&bad, "1 2\n2 2\n").unwrap();
    let out = run(&["cliques", s(&bad)]);
    assert_one_line_failure(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    fs::write(&bad, "1 2\n2 three\n").unwrap();
    let out = run(&["cliques", s(&bad)]);
    assert_one_line_failure(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 3"));
}

#[test]
fn failures_leave_no_output_files() {
    let d = TempDir::new().unwrap();
    let g = d.path().join("split.edges");
    fs::write(&g, "1 2\n3 4\n").unwrap();
    let out_path = d.path().join("traj.csv");
    let out = run(&[
        "simulate",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--steps",
        "5",
        "--seed",
        "1",
        "--out",
        s(&out_path),
    ]);
    assert_one_line_failure(&out);
    assert!(!out_path.exists());
}

#[test]
fn argument_errors_are_one_line() {
    let (_d, g) = fixture();
    assert_one_line_failure(&run(&[
        "simulate",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--steps",
        "5",
    ]));
    assert_one_line_failure(&run(&[
        "final-clique",
        s(&g),
        "--alpha",
        "1",
        "--beta",
        "1",
        "--counts",
        "9:1",
    ]));
    assert_one_line_failure(&run(&["nonsense"]));
}
