//! `circlenav` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use circlenav::bench::{run_bench, BenchPolicy};
use circlenav::env::EnvConfig;
use circlenav::eval::{self, TaskList};
use circlenav::maps::{self, GeneratorKind};
use circlenav::policies::{policy_by_name, POLICY_NAMES};
use circlenav::render::{self, EpisodeRecording, Series};
use circlenav::rng::RngKey;

#[derive(Parser)]
#[command(name = "circlenav", version, about = "Continuous multi-agent navigation simulator")]
struct Cli {
    /// Worker thread cap for batched stepping and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode with a built-in policy and print its metrics.
    Run(RunArgs),
    /// Measure batched stepping throughput.
    Bench(BenchArgs),
    /// Run an evaluation protocol from a task list.
    Eval(EvalArgs),
    /// Generate a map and print its canonical text form.
    GenMap(GenMapArgs),
    /// Render an episode snapshot or a chart to SVG.
    Render(RenderArgs),
}

/// Generator overrides shared by several commands.
#[derive(Args, Clone, Default)]
struct MapOverrides {
    /// Generator kind.
    #[arg(long = "map", alias = "kind")]
    kind: Option<String>,
    /// Grid rows and columns.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    agents: Option<usize>,
}

impl MapOverrides {
    fn apply(&self, cfg: &mut EnvConfig) -> Result<()> {
        if let Some(k) = &self.kind {
            cfg.generator.kind = GeneratorKind::from_name(k).with_context(|| {
                let names: Vec<&str> = GeneratorKind::ALL.iter().map(|k| k.name()).collect();
                format!("generator.kind: unknown kind {k:?}, expected one of {}", names.join(", "))
            })?;
        }
        if let Some(n) = self.size {
            cfg.generator.rows = n;
            cfg.generator.cols = n;
        }
        if let Some(d) = self.density {
            cfg.generator.obstacle_density = d;
        }
        if let Some(a) = self.agents {
            cfg.generator.num_agents = a;
        }
        cfg.validate()?;
        Ok(())
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "rrtstar_pd")]
    policy: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    map: MapOverrides,
    /// Write the episode recording (JSON) for `render --trace`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    map: MapOverrides,
    #[arg(long, default_value_t = 64)]
    envs: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// `zero` or `random`.
    #[arg(long, default_value = "zero")]
    policy: String,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML task list.
    #[arg(long)]
    tasks: PathBuf,
    /// One or more comma-separated policy names.
    #[arg(long, default_value = "rrtstar_pd")]
    policy: String,
    /// Directory for the report, CSV and SVG outputs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenMapArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Episode recording written by `run --trace`.
    #[arg(long, conflicts_with_all = ["report", "series"])]
    trace: Option<PathBuf>,
    /// Protocol report JSON written by `eval`.
    #[arg(long, conflicts_with = "series")]
    report: Option<PathBuf>,
    /// `step,value` CSV files to draw as curves.
    #[arg(long, num_args = 1..)]
    series: Vec<PathBuf>,
    /// Frame to draw from a trace; defaults to the last.
    #[arg(long)]
    frame: Option<usize>,
    /// Overlay planned paths.
    #[arg(long)]
    paths: bool,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<EnvConfig> {
    Ok(match path {
        Some(p) => EnvConfig::from_file(p)?,
        None => EnvConfig::default(),
    })
}

fn print_record(v: serde_json::Value) {
    println!("{v}");
}

fn cmd_run(a: RunArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.map.apply(&mut cfg)?;
    cfg.threads = threads.or(cfg.threads);
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut policy = policy_by_name(&a.policy, &cfg)
        .with_context(|| format!("unknown policy {:?}, expected one of {}", a.policy, POLICY_NAMES.join(", ")))?;
    let (rec, m) = eval::record_episode(&cfg, policy.as_mut(), seed)?;
    if let Some(path) = &a.trace {
        std::fs::write(path, serde_json::to_string(&rec)?).with_context(|| format!("writing {}", path.display()))?;
    }
    print_record(json!({
        "command": "run",
        "policy": a.policy,
        "seed": seed,
        "num_agents": m.reach_times.len(),
        "sr": m.success_rate,
        "ft": m.flowtime,
        "ms": m.makespan,
        "co": m.coordination,
        "collisions": m.collision_count,
    }));
    Ok(())
}

fn cmd_bench(a: BenchArgs, threads: Option<usize>) -> Result<()> {
    if a.steps == 0 {
        bail!(Usage("--steps must be at least 1".into()));
    }
    if a.envs == 0 {
        bail!(Usage("--envs must be at least 1".into()));
    }
    let policy = match a.policy.as_str() {
        "zero" => BenchPolicy::Zero,
        "random" => BenchPolicy::Random,
        other => bail!(Usage(format!("--policy must be zero or random, got {other:?}"))),
    };
    let mut cfg = load_config(a.config.as_deref())?;
    a.map.apply(&mut cfg)?;
    cfg.batch_size = a.envs;
    cfg.threads = threads.or(cfg.threads);
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let report = run_bench(&cfg, a.steps, a.warmup, policy)?;
    let mut v = serde_json::to_value(&report)?;
    v["command"] = json!("bench");
    print_record(v);
    Ok(())
}

fn cmd_eval(a: EvalArgs, threads: Option<usize>) -> Result<()> {
    let list = TaskList::from_file(&a.tasks)?;
    let names: Vec<String> = a.policy.split(',').map(|s| s.trim().to_string()).collect();
    let mut reports = Vec::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()?;
    for name in &names {
        let base = EnvConfig::default();
        if policy_by_name(name, &base).is_none() {
            bail!(Usage(format!("unknown policy {name:?}, expected one of {}", POLICY_NAMES.join(", "))));
        }
        let cfgs: Vec<EnvConfig> = list.tasks.iter().map(|t| t.config.clone()).collect();
        let name_c = name.clone();
        let factory = move || policy_by_name(&name_c, &cfgs[0]).expect("checked");
        let report = pool.install(|| eval::run_protocol(list.tier, &list.tasks, name, &factory))?;
        print!("{}", report.to_jsonl());
        for t in report.tasks.iter().filter(|t| t.error.is_some()) {
            print_record(json!({"error": "task", "task": t.task_id, "message": t.error}));
        }
        reports.push(report);
    }
    for i in 0..reports.len() {
        for j in 0..reports.len() {
            if i != j {
                for p in eval::improvement_pairs(&reports[i], &reports[j]) {
                    print_record(serde_json::to_value(&p)?);
                }
            }
        }
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)?;
        for r in &reports {
            let stem = dir.join(format!("{}-{}", r.tier.name(), r.policy));
            std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(r)?)?;
            std::fs::write(stem.with_extension("jsonl"), r.to_jsonl())?;
            let profile = Series {
                label: r.policy.clone(),
                points: r.taus.iter().copied().zip(r.profile.iter().copied()).collect(),
            };
            std::fs::write(
                dir.join(format!("{}-{}-profile.svg", r.tier.name(), r.policy)),
                render::line_chart("Performance profile (SR)", "tau", "fraction of runs > tau", &[profile]),
            )?;
            if !r.sweep.is_empty() {
                std::fs::write(dir.join(format!("{}-{}-sweep.csv", r.tier.name(), r.policy)), r.sweep_csv())?;
                std::fs::write(
                    dir.join(format!("{}-{}-sweep.svg", r.tier.name(), r.policy)),
                    sweep_chart(r),
                )?;
            }
        }
    }
    if reports.iter().any(|r| r.tasks.iter().any(|t| t.error.is_some())) {
        bail!("one or more tasks failed");
    }
    Ok(())
}

fn sweep_chart(r: &eval::ProtocolReport) -> String {
    let mut maps: Vec<&str> = r.sweep.iter().map(|s| s.map.as_str()).collect();
    maps.dedup();
    let series: Vec<Series> = maps
        .iter()
        .map(|m| Series {
            label: format!("{m} SR"),
            points: r
                .sweep
                .iter()
                .filter(|s| s.map == *m)
                .map(|s| (s.num_agents as f64, s.metrics[0]))
                .collect(),
        })
        .collect();
    render::line_chart("Success rate vs agents", "agents", "SR (IQM)", &series)
}

fn cmd_gen_map(a: GenMapArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    MapOverrides {
        kind: a.kind,
        size: a.size,
        density: a.density,
        agents: a.agents,
    }
    .apply(&mut cfg)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let layouts = circlenav::env::load_layouts(&cfg.generator)?;
    let (map, placement) = maps::generate(&cfg.generator, &layouts, 0, RngKey::from_seed(seed))?;
    let text = maps::write_map_text(&map, Some(&placement));
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let svg = if let Some(t) = &a.trace {
        let text = std::fs::read_to_string(t).with_context(|| format!("reading {}", t.display()))?;
        let rec: EpisodeRecording = serde_json::from_str(&text).with_context(|| format!("parsing {}", t.display()))?;
        let frame = a.frame.unwrap_or(rec.frames.len().saturating_sub(1));
        if frame >= rec.frames.len() {
            bail!(Usage(format!("--frame {frame} out of range (trace has {} frames)", rec.frames.len())));
        }
        render::render_snapshot(&rec, frame, a.paths)
    } else if let Some(r) = &a.report {
        let text = std::fs::read_to_string(r).with_context(|| format!("reading {}", r.display()))?;
        let rep: eval::ProtocolReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", r.display()))?;
        let s = Series {
            label: rep.policy.clone(),
            points: rep.taus.iter().copied().zip(rep.profile.iter().copied()).collect(),
        };
        render::line_chart("Performance profile (SR)", "tau", "fraction of runs > tau", &[s])
    } else if !a.series.is_empty() {
        let mut all = Vec::new();
        for p in &a.series {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            all.push(render::parse_series_csv(&label, &text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?);
        }
        render::line_chart("Learning curves", "step", "metric", &all)
    } else {
        bail!(Usage("one of --trace, --report or --series is required".into()));
    };
    std::fs::write(&a.out, svg).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            print_record(json!({"error": "usage", "message": e.kind().to_string(), "detail": e.to_string()}));
            return ExitCode::from(2);
        }
    };
    if cli.threads == Some(0) {
        print_record(json!({"error": "usage", "message": "--threads must be at least 1"}));
        return ExitCode::from(2);
    }
    let threads = cli.threads;
    let res = match cli.command {
        Command::Run(a) => cmd_run(a, threads),
        Command::Bench(a) => cmd_bench(a, threads),
        Command::Eval(a) => cmd_eval(a, threads),
        Command::GenMap(a) => cmd_gen_map(a),
        Command::Render(a) => cmd_render(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let usage = e.downcast_ref::<Usage>().is_some();
            print_record(json!({
                "error": if usage { "usage" } else { "runtime" },
                "message": format!("{e:#}"),
            }));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
