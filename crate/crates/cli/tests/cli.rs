use std::path::Path;
use std::process::{Command, Output};

fn circlenav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circlenav")).args(args).output().unwrap()
}

fn records(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

fn single(out: &Output) -> serde_json::Value {
    let mut r = records(out);
    assert_eq!(r.len(), 1, "{r:?}");
    r.remove(0)
}

#[test]
fn run_prints_metrics_and_renders_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let out = circlenav(&["run", "--policy", "zero", "--seed", "3", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let r = single(&out);
    assert_eq!(r["command"], "run");
    assert_eq!(r["num_agents"], 8);
    assert_eq!(r["sr"], 0.0);

    let svg = dir.path().join("snap.svg");
    let out = circlenav(&["render", "--trace", trace.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&svg).unwrap();
    // 120 obstacles, 8 goals, 8 agents
    assert_eq!(text.matches("<circle").count(), 136);

    let out = circlenav(&["render", "--trace", trace.to_str().unwrap(), "--frame", "100000", "--out", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(single(&out)["error"], "usage");
}

#[test]
fn bench_reports_throughput() {
    let out = circlenav(&["bench", "--envs", "4", "--steps", "5", "--warmup", "1", "--agents", "4", "--policy", "random"]);
    assert!(out.status.success(), "{out:?}");
    let r = single(&out);
    assert_eq!(r["command"], "bench");
    assert_eq!(r["envs"], 4);
    assert!(r["sps"].as_f64().unwrap() > 0.0);
    let out = circlenav(&["bench", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_map_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = circlenav(&["gen-map", "--kind", "maze_grid", "--size", "12", "--seed", "4"]);
    let b = circlenav(&["gen-map", "--kind", "maze_grid", "--size", "12", "--seed", "4"]);
    assert!(a.status.success(), "{a:?}");
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = circlenav(&["gen-map", "--kind", "maze_grid", "--size", "12", "--seed", "5"]);
    assert_ne!(a.stdout, c.stdout);
    let path = dir.path().join("m.txt");
    let d = circlenav(&["gen-map", "--kind", "maze_grid", "--size", "12", "--seed", "4", "--out", path.to_str().unwrap()]);
    assert!(d.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
}

#[test]
fn eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.toml");
    std::fs::write(
        &tasks,
        r#"
tier = "easy"
[[tasks]]
id = "tiny"
tier = "easy"
episodes = 2
seed = 1
[tasks.config]
episode_budget = 30
[tasks.config.generator]
rows = 8
cols = 8
num_agents = 2
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = circlenav(&[
        "eval", "--tasks", tasks.to_str().unwrap(), "--policy", "zero,random", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let recs = records(&out);
    assert!(recs.len() >= 8, "{recs:?}");
    let report = out_dir.join("easy-zero.json");
    assert!(report.exists());
    assert!(out_dir.join("easy-random-profile.svg").exists());

    let svg = dir.path().join("profile.svg");
    let out = circlenav(&["render", "--report", report.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));

    let out = circlenav(&["eval", "--tasks", tasks.to_str().unwrap(), "--policy", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn render_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    std::fs::write(&csv, "step,value\n0,0.1\n10,0.4\n20,0.7\n").unwrap();
    let svg = dir.path().join("curve.svg");
    let out = circlenav(&["render", "--series", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert!(std::fs::read_to_string(&svg).unwrap().contains("curve"));
}

#[test]
fn error_exit_codes() {
    let out = circlenav(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(single(&out)["error"], "usage");

    let out = circlenav(&["run", "--map", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let r = single(&out);
    assert_eq!(r["error"], "runtime");
    assert!(r["message"].as_str().unwrap().contains("generator.kind"));

    let missing = Path::new("/nonexistent/cfg.toml");
    let out = circlenav(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = circlenav(&["--threads", "0", "bench"]);
    assert_eq!(out.status.code(), Some(2));

    let out = circlenav(&["render", "--out", "/tmp/x.svg"]);
    assert_eq!(out.status.code(), Some(2));
}
