use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn closure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_closure"))
        .args(args)
        .env_remove("CLOSURE_CONFIG")
        .env_remove("CLOSURE_OUT")
        .env_remove("CLOSURE_SEED")
        .env_remove("CLOSURE_WORKERS")
        .env_remove("CLOSURE_QUIET")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn last_line(o: &Output) -> String {
    stdout(o).lines().last().unwrap_or_default().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small, fast problem on the reduced vocabulary.
const TINY: &str = r#"
m = 8
max_iterations = 4
checkpoint_every = 0

[vocabulary]
integers = [2]
reciprocals = [2]

[template]
n_max = 2
max_depth = 3

[solver]
t_end = 0.04
dt = 0.004

[solver.grid]
n = 100

[reward]
norm = "grid_weighted"

[policy.actor]
width = 12
relu_layers = 2
sigmoid_layers = 1

[convergence]
n_samples = 200
cadence = 2
"#;

const SINGLE: &str = r#"
m = 4
max_iterations = 3
target = "u"

[vocabulary]
operands = ["u"]
integers = []
reciprocals = []
unaries = ["identity"]
binaries = ["add"]

[template]
n_max = 1
max_depth = 1

[solver]
t_end = 0.04
dt = 0.004

[solver.grid]
n = 100
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_writes_five_snapshots_of_the_default_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = closure(&["solve", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("snapshot_"))
        .collect();
    files.sort();
    assert_eq!(
        files,
        ["snapshot_t0.000.csv", "snapshot_t0.200.csv", "snapshot_t0.400.csv", "snapshot_t0.600.csv", "snapshot_t0.800.csv"]
    );
    for f in &files {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1001, "{f}");
        assert_eq!(text.lines().next(), Some("t,x,u"));
    }
    assert!(out.join("run_config.toml").exists());
}

#[test]
fn solve_with_zero_horizon_returns_the_initial_pulse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[solver]\nt_end = 0.0\n");
    let out = tmp.path().join("out");
    let o = closure(&["solve", "--config", s(&cfg), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    let snaps: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("snapshot_"))
        .collect();
    assert_eq!(snaps.len(), 1);
    let mut reader = csv::Reader::from_path(out.join("snapshot_t0.000.csv")).unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[1].parse().unwrap();
        let u: f64 = rec[2].parse().unwrap();
        let expect = if (0.25..0.5).contains(&x) { 1.0 } else { 0.0 };
        assert_eq!(u, expect, "x = {x}");
        rows += 1;
    }
    assert_eq!(rows, 1000);
}

#[test]
fn unwritable_output_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = closure(&["solve", "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("output directory"), "{}", stderr(&o));
}

#[test]
fn malformed_config_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "m = 10\n\nmax_iterations = ten\n");
    let o = closure(&["discover", "--config", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("bad.toml"), "{err}");
}

#[test]
fn discover_without_iterations_is_not_converged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &TINY.replace("max_iterations = 4", "max_iterations = 0"));
    let out = tmp.path().join("out");
    let o = closure(&["discover", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(last_line(&o).contains("not converged"), "{}", stdout(&o));
    assert!(last_line(&o).contains("P(exact)"));
    for f in ["runlog.jsonl", "summary.json", "curve.csv", "snapshots.csv", "run_config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn discover_and_random_search_repeat_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", TINY);
    for cmd in ["discover", "random-search"] {
        let (a, b) = (tmp.path().join(format!("{cmd}-a")), tmp.path().join(format!("{cmd}-b")));
        for dir in [&a, &b] {
            let o = closure(&[cmd, "--config", s(&cfg), "--out", s(dir), "--workers", "2", "--seed", "7"]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
        for f in ["runlog.jsonl", "summary.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{cmd} {f}");
        }
    }
}

#[test]
fn overrides_beat_environment_beats_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("seed = 1\n{TINY}"));
    let echo_seed = |dir: &Path| -> u64 {
        let text = fs::read_to_string(dir.join("summary.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["seed"].as_u64().unwrap()
    };
    let run = |extra: &[&str], env: Option<&str>, dir: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_closure"));
        c.args(["random-search", "--config", s(&cfg), "--out", s(dir), "--quiet"]).args(extra);
        c.env_remove("CLOSURE_SEED");
        if let Some(seed) = env {
            c.env("CLOSURE_SEED", seed);
        }
        assert!(c.output().unwrap().status.success());
    };
    let d1 = tmp.path().join("file");
    run(&[], None, &d1);
    assert_eq!(echo_seed(&d1), 1);
    let d2 = tmp.path().join("env");
    run(&[], Some("5"), &d2);
    assert_eq!(echo_seed(&d2), 5);
    let d3 = tmp.path().join("flag");
    run(&["--seed", "9"], Some("5"), &d3);
    assert_eq!(echo_seed(&d3), 9);
}

#[test]
fn random_search_single_assignment_hits_at_sample_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SINGLE);
    let o = closure(&["random-search", "--config", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(last_line(&o).contains("hit at sample 1 "), "{}", stdout(&o));
}

#[test]
fn random_search_budget_without_hit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", TINY);
    let o = closure(&["random-search", "--config", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(last_line(&o).contains("no hit within budget"), "{}", stdout(&o));
}

#[test]
fn report_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", TINY);
    let runs: Vec<PathBuf> = (0..3).map(|i| tmp.path().join(format!("run{i}"))).collect();
    for (i, dir) in runs.iter().enumerate() {
        let seed = i.to_string();
        let o = closure(&["discover", "--config", s(&cfg), "--out", s(dir), "--seed", &seed, "-q"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }

    let one = tmp.path().join("report1");
    let o = closure(&["report", s(&runs[0]), "--out", s(&one)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csvs: Vec<String> = fs::read_dir(&one)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs.len(), 2, "{csvs:?}");

    let three = tmp.path().join("report3");
    let args: Vec<&str> = ["report", "--out", s(&three)].into_iter().chain(runs.iter().map(|p| s(p))).collect();
    let o = closure(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(three.join("ensemble_curve.csv").exists());

    let missing = closure(&["report", s(&tmp.path().join("nope")), "--out", s(&three)]);
    assert!(!missing.status.success());

    let log = runs[1].join("runlog.jsonl");
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("not json\n");
    fs::write(&log, &text).unwrap();
    let corrupt = closure(&["report", s(&runs[1]), "--out", s(&three)]);
    assert!(!corrupt.status.success());
    let line = text.lines().count();
    assert!(stderr(&corrupt).contains(&format!("line {line}")), "{}", stderr(&corrupt));
}

#[test]
fn discover_resumes_from_its_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let tiny = TINY.replace("checkpoint_every = 0", "checkpoint_every = 2");
    let short = write_config(tmp.path(), "short.toml", &tiny.replace("max_iterations = 4", "max_iterations = 2"));
    let long = write_config(tmp.path(), "long.toml", &tiny);
    let out = tmp.path().join("out");
    for cfg in [&short, &long] {
        let o = closure(&["discover", "--config", s(cfg), "--out", s(&out), "-q"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let iterations: Vec<u64> = fs::read_to_string(out.join("runlog.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["iteration"].as_u64().unwrap())
        .collect();
    assert_eq!(iterations, [0, 1, 2, 3, 4]);

    let changed = write_config(tmp.path(), "changed.toml", &tiny.replace("m = 8", "m = 9"));
    let o = closure(&["discover", "--config", s(&changed), "--out", s(&out), "-q"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint"), "{}", stderr(&o));
}
