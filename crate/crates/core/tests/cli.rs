use std::path::PathBuf;
use std::process::{Command, Output};

fn jointplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointplan"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn plan_worked_example() {
    let o = jointplan(&[
        "plan",
        "--scenario",
        "scenarios/worked_example.json",
        "--ground-truth",
        "scenarios/worked_example_truth.json",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("query 1: o1=passable"), "{text}");
    assert!(
        text.contains("1 query event(s), 1 object(s) verified, cost 11"),
        "{text}"
    );
    assert!(
        text.contains("waypoints: [[0.5,1.5],[1.5,1.5],[2.5,1.5],[3.5,1.5],[4.5,1.5]]"),
        "{text}"
    );
    assert!(text.trim_end().ends_with("success"));
}

#[test]
fn plan_dumps_tree_and_policy() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let policy = dir.path().join("policy.json");
    let o = jointplan(&[
        "plan",
        "--scenario",
        "scenarios/worked_example_full.json",
        "--dump-tree",
        tree.to_str().unwrap(),
        "--dump-policy",
        policy.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["success"], true);
    for p in [tree, policy] {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 1);
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(jointplan(&[]).status.code(), Some(2));
    assert_eq!(jointplan(&["plan"]).status.code(), Some(2));
    assert_eq!(
        jointplan(&["plan", "--scenario", "does/not/exist.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        jointplan(&["plan", "--scenario", "scenarios/worked_example.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        jointplan(&["collab", "--layout", "nowhere"]).status.code(),
        Some(2)
    );
    assert_eq!(
        jointplan(&["oracle", "--max-n", "9"]).status.code(),
        Some(2)
    );
    assert_eq!(jointplan(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let o = jointplan(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["plan", "collab", "bench", "oracle", "serve"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn no_query_baseline_fails_on_replica() {
    let o = jointplan(&[
        "plan",
        "--scenario",
        "scenarios/replica.json",
        "--policy",
        "none",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("grounded to yellow_box, expected black_box"));
    let o = jointplan(&[
        "plan",
        "--scenario",
        "scenarios/replica.json",
        "--policy",
        "optimal",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn oracle_matches() {
    let o = jointplan(&["oracle", "--max-n", "3", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "200/200 match");
}

#[test]
fn collab_writes_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("episode.jsonl");
    let o = jointplan(&[
        "collab",
        "--layout",
        "fork",
        "--human",
        "rational",
        "--policy",
        "intent",
        "--log",
        log.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).starts_with("layout fork | human rational | policy intent"));
    let lines = std::fs::read_to_string(&log).unwrap();
    assert!(lines.lines().count() > 10);
    for line in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["t"].is_number());
    }
}

#[test]
fn bench_mode1_report() {
    let dir = tempfile::tempdir().unwrap();
    let out: PathBuf = dir.path().join("report.json");
    let o = jointplan(&["bench", "--suite", "mode1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["mode1"].as_array().unwrap().len(), 3);
    assert_eq!(report["mode1_episodes"].as_array().unwrap().len(), 75);

    let o = jointplan(&["bench", "--suite", "scenarios/suite.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).is_empty());
}
