use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use hexar::read_trace;

const NO_ANSWER: &str = "I do not have enough information to answer this question.";

fn hexar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hexar"))
        .args(args)
        .env_remove("HEXAR_REASONER_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn eval_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../eval/tests/fixtures").join(name)
}

fn without_timing(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with("wall_time:")).collect::<Vec<_>>().join("\n")
}

fn simulate(dir: &Path, scenario: &str, task: &str) -> PathBuf {
    let out = dir.join(format!("s{scenario}-v{task}.jsonl"));
    let o = hexar(&["simulate", "--scenario", scenario, "--task", task, "--seed", "42", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn scenarios_lists_twenty_rows() {
    let o = hexar(&["scenarios"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 21);
    let one = hexar(&["scenarios", "--id", "7"]);
    let text = stdout(&one);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with("7 "));
    let bad = hexar(&["scenarios", "--id", "0"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("out of range"));
}

#[test]
fn simulate_writes_a_readable_reproducible_trace() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "7", "1");
    let trace = read_trace(&a).unwrap();
    assert_eq!((trace.scenario_id, trace.task_variant, trace.seed), (7, 1, 42));
    let first = fs::read(&a).unwrap();
    simulate(dir.path(), "7", "1");
    assert_eq!(fs::read(&a).unwrap(), first);

    let out = dir.path().join("bad.jsonl");
    let o = hexar(&["simulate", "--scenario", "21", "--task", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = hexar(&["simulate", "--scenario", "3", "--task", "4", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn explain_charging_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let trace = simulate(dir.path(), "7", "1");
    let args = ["explain", "--trace", p(&trace), "--query", "Why did you not move to the kitchen?"];
    let o = hexar(&args);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("charg"), "{text}");
    assert!(text.contains("produced_by: navigation"));
    assert!(text.contains("wall_time: "));
    assert_eq!(without_timing(&stdout(&hexar(&args))), without_timing(&text));

    let all = hexar(&[
        "explain", "--trace", p(&trace), "--query", "What went wrong?", "--method", "all-components",
    ]);
    let text = stdout(&all);
    for id in ["planner", "navigation", "text_to_speech", "ask_human_for_help", "pizza_recommender"] {
        assert!(text.contains(id), "{id} missing from {text}");
    }
    let e2e = hexar(&["explain", "--trace", p(&trace), "--query", "Why?", "--method", "end_to_end"]);
    assert!(stdout(&e2e).contains("produced_by: end_to_end"), "{}", stdout(&e2e));
}

#[test]
fn explain_without_a_plan_gives_the_fallback_reply() {
    let dir = tempfile::tempdir().unwrap();
    let trace = simulate(dir.path(), "7", "1");
    let text = fs::read_to_string(&trace).unwrap();
    let stripped: String = text.lines().filter(|l| !l.contains("\"kind\":\"plan\"")).map(|l| format!("{l}\n")).collect();
    let broken = dir.path().join("noplan.jsonl");
    fs::write(&broken, stripped).unwrap();
    let o = hexar(&["explain", "--trace", p(&broken), "--query", "Why?"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).trim(), NO_ANSWER);

    let o = hexar(&["explain", "--trace", p(&dir.path().join("missing.jsonl")), "--query", "Why?"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hexar(&["explain", "--trace", p(&trace), "--query", "Why?", "--method", "oracle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn interactive_answers_each_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = simulate(dir.path(), "19", "1");
    let mut child = Command::new(env!("CARGO_BIN_EXE_hexar"))
        .args(["explain", "--trace", p(&trace), "--interactive"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"Why did you stop talking?\n\nWhat happened?\nquit\nignored\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.matches("produced_by:").count(), 2, "{text}");
    assert!(text.contains("timed out"));
}

fn data_rows(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|row| {
            let row = row.unwrap();
            // every column except wall_time
            row.iter()
                .enumerate()
                .filter(|(i, _)| *i != 8)
                .map(|(_, c)| c)
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect()
}

#[test]
fn evaluate_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    assert!(hexar(&["manifest", "--out", p(&manifest)]).status.success());

    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = hexar(&["evaluate", "--manifest", p(&manifest), "--seed", "0", "--jobs", "2", "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let rows = data_rows(&a);
    assert_eq!(rows.len(), 540);
    assert_eq!(rows, data_rows(&b));

    let single = dir.path().join("hexar.csv");
    let o = hexar(&["evaluate", "--manifest", p(&manifest), "--methods", "hexar", "--out", p(&single)]);
    assert!(o.status.success());
    assert_eq!(data_rows(&single).len(), 180);

    let report = dir.path().join("report");
    let o = hexar(&["report", "--results", p(&a), "--auto-annotate", "--out", p(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let md = fs::read_to_string(report.join("report.md")).unwrap();
    assert!(md.contains("## Selection accuracy") && md.contains("Overall: 180/180"));
    assert!(report.join("report.csv").exists() && report.join("annotations.csv").exists());
}

#[test]
fn evaluate_rejects_bad_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    for (name, body) in [
        ("range.csv", "scenario_id,task_variant,query_index\n21,1,1\n"),
        ("header.csv", "s,v,q\n1,1,1\n"),
        ("text.csv", "scenario_id,task_variant,query_index\none,1,1\n"),
    ] {
        let m = dir.path().join(name);
        fs::write(&m, body).unwrap();
        let o = hexar(&["evaluate", "--manifest", p(&m), "--out", p(&out)]);
        assert_eq!(o.status.code(), Some(2), "{name}");
    }
    let o = hexar(&["evaluate", "--manifest", p(&dir.path().join("none.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_on_fixture_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = hexar(&[
        "report",
        "--results",
        p(&eval_fixture("results.csv")),
        "--annotations",
        p(&eval_fixture("annotations.csv")),
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["report.md", "report.csv"] {
        assert_eq!(
            fs::read_to_string(dir.path().join(name)).unwrap(),
            fs::read_to_string(eval_fixture(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn report_rejects_incomplete_or_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = fs::read_to_string(eval_fixture("annotations.csv")).unwrap();
    let gap: String = annotations
        .lines()
        .enumerate()
        .filter(|(i, _)| *i != 3)
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    let partial = dir.path().join("partial.csv");
    fs::write(&partial, gap).unwrap();
    let out = dir.path().join("out");
    let o = hexar(&[
        "report", "--results", p(&eval_fixture("results.csv")), "--annotations", p(&partial), "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lacks annotator"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,text\n1,hello\n").unwrap();
    let o = hexar(&["report", "--results", p(&bad), "--auto-annotate", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = hexar(&["report", "--results", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
