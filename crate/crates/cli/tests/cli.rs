use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use berthcast::predictions::parse_predictions;

fn berthcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_berthcast"))
        .args(args)
        .output()
        .expect("spawn berthcast")
}

fn ok(args: &[&str]) -> String {
    let out = berthcast(args);
    assert!(
        out.status.success(),
        "berthcast {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let out = dir.join(name);
    ok(&[
        "gen",
        "--ports",
        "3",
        "--routes-per-port",
        "6",
        "--seed",
        &seed.to_string(),
        "--min-points",
        "8",
        "--max-points",
        "15",
        "--out",
        s(&out),
    ]);
    out
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_small(dir.path(), "a.csv", 5);
    let b = gen_small(dir.path(), "b.csv", 5);
    let c = gen_small(dir.path(), "c.csv", 6);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn gen_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let stdout = ok(&[
        "gen",
        "--ports",
        "2",
        "--routes-per-port",
        "3",
        "--seed",
        "1",
        "--min-points",
        "5",
        "--max-points",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(stdout.trim(), "routes=6 points=30");
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 31);
}

#[test]
fn missing_file_exits_1() {
    let out = berthcast(&[
        "evaluate",
        "--train",
        "/nonexistent/a.csv",
        "--test",
        "/nonexistent/b.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn empty_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "d.csv", 1);
    let header = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, format!("{header}\n")).unwrap();
    let out = berthcast(&["evaluate", "--train", s(&data), "--test", s(&empty)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_rows_are_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "d.csv", 2);
    let mut text = fs::read_to_string(&data).unwrap();
    text.push_str("garbage,row\n");
    let dirty = dir.path().join("dirty.csv");
    fs::write(&dirty, text).unwrap();
    let out = berthcast(&["evaluate", "--train", s(&data), "--test", s(&dirty)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning:"));
}

#[test]
fn evaluate_self_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "d.csv", 3);
    let stdout = ok(&["evaluate", "--train", s(&data), "--test", s(&data)]);
    assert!(stdout.starts_with("route_id,earliness,mae_minutes\n"));
    assert!(stdout.contains("earliness=1.000000 mae_minutes=0.000000"));
}

#[test]
fn evaluate_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let train = gen_small(dir.path(), "train.csv", 4);
    let test = gen_small(dir.path(), "test.csv", 40);
    let run = |t: &str| {
        ok(&[
            "evaluate",
            "--train",
            s(&train),
            "--test",
            s(&test),
            "--threads",
            t,
        ])
    };
    assert_eq!(run("1"), run("8"));
}

#[test]
fn predict_rows_follow_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let train = gen_small(dir.path(), "train.csv", 7);
    let query = gen_small(dir.path(), "query.csv", 70);
    let text = fs::read_to_string(&query).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    let shuffled = dir.path().join("shuffled.csv");
    fs::write(&shuffled, format!("{header}\n{}\n", lines.join("\n"))).unwrap();

    let stdout = ok(&["predict", "--train", s(&train), "--query", s(&shuffled)]);
    let rows = parse_predictions(&stdout).unwrap();
    assert_eq!(rows.len(), lines.len());
    // Input is reversed, so each route's rows appear with descending seq.
    for w in rows.windows(2) {
        if w[0].route_key == w[1].route_key {
            assert_eq!(w[0].seq, w[1].seq + 1);
        }
    }
}

#[test]
fn tune_is_deterministic_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "d.csv", 9);
    let tune = |tag: &str| {
        let params = dir.path().join(format!("params_{tag}.txt"));
        let history = dir.path().join(format!("history_{tag}.csv"));
        let stdout = ok(&[
            "tune",
            "--train",
            s(&data),
            "--generations",
            "3",
            "--population",
            "6",
            "--seed",
            "11",
            "--out",
            s(&params),
            "--history",
            s(&history),
        ]);
        (
            stdout,
            fs::read_to_string(params).unwrap(),
            fs::read_to_string(history).unwrap(),
        )
    };
    let a = tune("a");
    let b = tune("b");
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_eq!(a.2.lines().count(), 1 + 4);
    assert!(a.0.starts_with("best_fitness="));

    let params = dir.path().join("params_a.txt");
    let stdout = ok(&[
        "evaluate",
        "--train",
        s(&data),
        "--test",
        s(&data),
        "--params",
        s(&params),
    ]);
    assert!(stdout.contains("earliness="));
}

#[test]
fn invalid_params_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "d.csv", 10);
    let params = dir.path().join("bad.txt");
    fs::write(&params, "penalty.speed=-1\n").unwrap();
    let out = berthcast(&[
        "evaluate",
        "--train",
        s(&data),
        "--test",
        s(&data),
        "--params",
        s(&params),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_reports_every_structure() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "d.csv", 12);
    let stdout = ok(&["bench", "--train", s(&data), "--queries", "50"]);
    assert!(stdout.contains("correctness=ok"));
    for name in ["balltree", "kdtree", "brute"] {
        assert!(stdout.contains(&format!("structure={name} ")), "{stdout}");
    }
    let only = ok(&[
        "bench",
        "--train",
        s(&data),
        "--queries",
        "10",
        "--structure",
        "kdtree",
    ]);
    assert!(only.contains("structure=kdtree") && !only.contains("structure=brute"));
}
