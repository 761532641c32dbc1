use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use stackmatch::graph::to_json;
use stackmatch::log::parse_log;
use stackmatch::sim::fixtures::{depth_fixture, REFERENCE_DEPTH_COUNTS};
use stackmatch::sim::GroundTruth;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"{"gen":{"node_budget":600,"branch_fraction":0.3,"icc_links":1},"scenario":{"threads":2}}"#;
const ADVERSARIAL: &str =
    r#"{"gen":{"node_budget":2600,"branch_fraction":0.23,"reflective_fraction":0.9,"seed":0},"scenario":{"k":32,"seed":0}}"#;

fn simulate(dir: &TempDir, params: &str, out: &str, extra: &[&str]) -> String {
    let p = write(dir, "params.json", params);
    let out = path(dir, out);
    let mut args = vec!["simulate", "-p", &p, "-o", &out];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn truth_sequences(truth: &GroundTruth) -> BTreeMap<u64, Vec<u64>> {
    truth.segments().map(|s| (s.callback_seq, s.node_sequence.clone())).collect()
}

fn report_sequences(report: &serde_json::Value) -> BTreeMap<u64, Vec<u64>> {
    report["threads"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|t| t["segments"].as_array().unwrap())
        .map(|s| {
            let nodes = s["nodes"].as_array().unwrap().iter().map(|n| n.as_u64().unwrap()).collect();
            (s["callback_seq"].as_u64().unwrap(), nodes)
        })
        .collect()
}

fn read_truth(dir: &Path) -> GroundTruth {
    serde_json::from_slice(&fs::read(dir.join("truth.json")).unwrap()).unwrap()
}

#[test]
fn simulate_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, SMALL, "a", &["--seed", "7", "--k", "11"]);
    let b = simulate(&dir, SMALL, "b", &["--seed", "7", "--k", "11"]);
    for f in ["app.json", "trace.jsonl", "truth.json"] {
        let fa = fs::read(Path::new(&a).join(f)).unwrap();
        let fb = fs::read(Path::new(&b).join(f)).unwrap();
        assert_eq!(fa, fb, "{f} differs");
    }
}

#[test]
fn window_of_one() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, SMALL, "k1", &["--k", "1"]);
    let log = parse_log(&fs::read(Path::new(&out).join("trace.jsonl")).unwrap(), 1).unwrap();
    assert!(!log.is_empty());
    assert!(log.records.iter().all(|r| r.csi.p.len() == 1));
}

#[test]
fn match_reproduces_the_simulated_walks() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, SMALL, "sim", &["--seed", "3"]);
    let report = path(&dir, "report.json");
    let app = format!("{out}/app.json");
    let trace = format!("{out}/trace.jsonl");
    let o = run(&["match", "-g", &app, "-l", &trace, "-o", &report, "--emit-dot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("tid ")).count(), 2);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(report_sequences(&json), truth_sequences(&read_truth(Path::new(&out))));
    assert!(fs::read_to_string(path(&dir, "report.dot")).unwrap().starts_with("digraph"));
}

#[test]
fn backtracking_on_the_adversarial_app_is_wrong_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, ADVERSARIAL, "adv", &[]);
    let report = path(&dir, "report.json");
    let app = format!("{out}/app.json");
    let trace = format!("{out}/trace.jsonl");
    let o = run(&["match", "-g", &app, "-l", &trace, "-o", &report, "--strategy", "backtracking"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["strategy"], "backtracking");
    let truth = truth_sequences(&read_truth(Path::new(&out)));
    assert_ne!(report_sequences(&json), truth);
    let ambiguous = json["threads"][0]["segments"]
        .as_array()
        .unwrap()
        .iter()
        .any(|s| s["ambiguous"] == true);
    assert!(ambiguous);
    let strict = run(&["match", "-g", &app, "-l", &trace, "-o", &report, "--strategy", "backtracking", "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn table_scale_simulation_is_fast() {
    let dir = TempDir::new().unwrap();
    let params = ADVERSARIAL.replace(r#""k":32"#, r#""k":32,"events":60,"threads":2"#);
    let t = Instant::now();
    let out = simulate(&dir, &params, "big", &[]);
    let elapsed = t.elapsed();
    let log = parse_log(&fs::read(Path::new(&out).join("trace.jsonl")).unwrap(), 32).unwrap();
    assert!(log.len() >= 10_000, "{} records", log.len());
    assert!(elapsed.as_secs_f64() < 10.0, "{elapsed:?}");
}

#[test]
fn missing_input_names_the_path() {
    let dir = TempDir::new().unwrap();
    let app = write(&dir, "app.json", &to_json(&depth_fixture(&[1])));
    let missing = path(&dir, "nope.jsonl");
    let o = run(&["match", "-g", &app, "-l", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.jsonl"));
}

#[test]
fn conflicting_strategies_are_rejected() {
    let o = run(&["match", "-g", "a", "-l", "b", "--strategy", "guided", "--strategy", "backtracking"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_depth_selects_eleven_on_the_reference_shape() {
    let dir = TempDir::new().unwrap();
    let app = write(&dir, "app.json", &to_json(&depth_fixture(&REFERENCE_DEPTH_COUNTS)));
    let table = write(&dir, "overhead.csv", "k,overhead\n1,0.0099\n16,0.0259\n");
    let cdf = path(&dir, "cdf.csv");
    let o = run(&["analyze-depth", "-g", &app, "--overhead", &table, "-o", &cdf]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "selected K = 11");
    let text = fs::read_to_string(&cdf).unwrap();
    assert!(text.starts_with("k,coverage\n"));
    assert!(text.contains("\n11,0.9788\n"));
}

#[test]
fn analyze_depth_small_models() {
    let dir = TempDir::new().unwrap();
    let flat = write(&dir, "flat.json", &to_json(&depth_fixture(&[3])));
    let o = run(&["analyze-depth", "-g", &flat, "-o", &path(&dir, "flat.csv")]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "selected K = 1");

    let multi = write(&dir, "multi.json", &to_json(&depth_fixture(&[1, 2, 0, 0, 1])));
    let o = run(&["analyze-depth", "-g", &multi]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(rows[0], "k,coverage");
    assert_eq!(rows[1], "1,0.25");
    assert_eq!(rows[2], "2,0.75");
    assert_eq!(rows[5], "5,1.0");

    let short = write(&dir, "short.csv", "k,overhead\n1,0.01\n3,0.02\n");
    let o = run(&["analyze-depth", "-g", &multi, "--overhead", &short]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_emits_one_row() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, SMALL, "sim", &["--seed", "5"]);
    let app = format!("{out}/app.json");
    let trace = format!("{out}/trace.jsonl");
    let truth = format!("{out}/truth.json");
    let o = run(&["compare", "-g", &app, "-l", &trace, "-t", &truth]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "Sum of Logs,Sum of Nodes,Sum of Branch Nodes,Guided Time (sec),Guided Num of Visited Nodes,Guided Correct?,Backtracking Time (sec),Backtracking Num of Visited Nodes,Backtracking Correct?"
    );
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols[5], "true");

    let mut t: GroundTruth = serde_json::from_slice(&fs::read(&truth).unwrap()).unwrap();
    t.records.pop();
    let bad = write(&dir, "bad.json", &serde_json::to_string(&t).unwrap());
    let o = run(&["compare", "-g", &app, "-l", &trace, "-t", &bad]);
    assert_eq!(o.status.code(), Some(2));
}
