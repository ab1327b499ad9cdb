use circlenav::env::EnvConfig;
use circlenav::eval::{
    check_tier_shape, episode_seed, improvement_pairs, run_episode, run_protocol, run_task, EvalError, TaskList,
    TaskSpec, Tier,
};
use circlenav::maps::GeneratorKind;
use circlenav::policies::{policy_by_name, Policy, ZeroPolicy};

fn task(id: &str, tier: Tier, kind: GeneratorKind, episodes: usize) -> TaskSpec {
    let mut config = EnvConfig::default();
    config.generator.kind = kind;
    TaskSpec { id: id.into(), tier, episodes, seed: 17, config }
}

fn small_task(agents: usize) -> TaskSpec {
    let mut t = task("small", Tier::Easy, GeneratorKind::RandomGrid, 6);
    t.config.generator.rows = 10;
    t.config.generator.cols = 10;
    t.config.generator.num_agents = agents;
    t
}

#[test]
fn zero_policy_never_succeeds() {
    let t = small_task(4);
    for e in 0..t.episodes {
        let m = run_episode(&t, &mut ZeroPolicy, e).unwrap();
        assert_eq!(m.success_rate, 0.0);
        assert_eq!(m.flowtime, t.config.episode_budget as f64);
    }
}

#[test]
fn episodes_are_reproducible() {
    let t = small_task(4);
    let mut a = policy_by_name("rrtstar_pd", &t.config).unwrap();
    let mut b = policy_by_name("rrtstar_pd", &t.config).unwrap();
    assert_eq!(run_episode(&t, a.as_mut(), 3).unwrap(), run_episode(&t, b.as_mut(), 3).unwrap());
    let par = run_task(&t, &|| policy_by_name("random", &t.config).unwrap()).unwrap();
    let seq: Vec<_> = (0..t.episodes)
        .map(|e| run_episode(&t, policy_by_name("random", &t.config).unwrap().as_mut(), e).unwrap())
        .collect();
    assert_eq!(par, seq);
    assert_ne!(episode_seed(17, 0), episode_seed(17, 1));
    assert_ne!(episode_seed(17, 0), episode_seed(18, 0));
}

#[test]
fn every_named_policy_runs() {
    let mut t = small_task(3);
    t.config.generator.num_diffdrive = 1;
    for name in circlenav::policies::POLICY_NAMES {
        let mut p = policy_by_name(name, &t.config).unwrap();
        assert_eq!(p.name(), name);
        let m = run_episode(&t, p.as_mut(), 0).unwrap();
        assert!((0.0..=1.0).contains(&m.success_rate), "{name}");
    }
    assert!(policy_by_name("nope", &t.config).is_none());
}

#[test]
fn planners_beat_zero_on_small_grids() {
    let t = small_task(4);
    let sr = |name: &str| -> f64 {
        let ms = run_task(&t, &|| policy_by_name(name, &t.config).unwrap()).unwrap();
        ms.iter().map(|m| m.success_rate).sum::<f64>() / ms.len() as f64
    };
    let zero = sr("zero");
    assert!(sr("rrtstar_pd") > zero + 0.5);
    assert!(sr("rrtstar_guided_pd") > zero + 0.5);
}

#[test]
fn tier_shapes() {
    let easy = vec![small_task(2)];
    assert!(check_tier_shape(Tier::Easy, &easy).is_ok());
    assert!(matches!(check_tier_shape(Tier::Medium, &easy), Err(EvalError::TierShape { .. })));
    let mut medium: Vec<TaskSpec> = (0..6)
        .map(|i| task(&format!("r{i}"), Tier::Medium, GeneratorKind::RandomGrid, 1))
        .chain((0..6).map(|i| task(&format!("m{i}"), Tier::Medium, GeneratorKind::MazeGrid, 1)))
        .collect();
    assert!(check_tier_shape(Tier::Medium, &medium).is_ok());
    medium[0].config.generator.kind = GeneratorKind::CavesCont;
    assert!(check_tier_shape(Tier::Medium, &medium).is_err());
    medium.pop();
    assert!(check_tier_shape(Tier::Medium, &medium).is_err());
    let hard = vec![task("h", Tier::Hard, GeneratorKind::RandomGrid, 1)];
    assert!(check_tier_shape(Tier::Hard, &hard).is_err());
    assert!(check_tier_shape(Tier::Easy, &[]).is_err());
}

#[test]
fn protocol_report_shape_and_determinism() {
    let tasks = vec![small_task(2), { let mut t = small_task(3); t.id = "three".into(); t }];
    let factory = || -> Box<dyn Policy> { Box::new(ZeroPolicy) };
    let a = run_protocol(Tier::Easy, &tasks, "zero", &factory).unwrap();
    let b = run_protocol(Tier::Easy, &tasks, "zero", &factory).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.tasks.len(), 2);
    for t in &a.tasks {
        assert_eq!(t.metrics.len(), 4);
        for m in &t.metrics {
            assert!(m.ci_lo <= m.iqm && m.iqm <= m.ci_hi);
        }
    }
    assert_eq!(a.records().len(), 8);
    assert_eq!(a.to_jsonl().lines().count(), 8);
    assert_eq!(a.profile.len(), a.taus.len());
    assert!(a.sweep.is_empty());
    let pairs = improvement_pairs(&a, &b);
    assert!(pairs.iter().all(|p| p.probability == 0.5));
}

#[test]
fn failed_tasks_are_recorded() {
    let mut broken = small_task(2);
    broken.id = "broken".into();
    broken.config.generator.kind = GeneratorKind::Movingai;
    broken.config.generator.map_file = Some("/nonexistent/none.map".into());
    let tasks = vec![small_task(2), broken];
    let report = run_protocol(Tier::Easy, &tasks, "zero", &|| Box::new(ZeroPolicy)).unwrap();
    assert!(report.tasks[0].error.is_none());
    assert!(report.tasks[1].error.is_some());
    assert!(report.tasks[1].metrics.is_empty());
}

#[test]
fn hard_tier_sweeps_agent_counts() {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/arena.map");
    let tasks: Vec<TaskSpec> = [2, 4]
        .into_iter()
        .map(|n| {
            let mut t = task(&format!("arena-{n}"), Tier::Hard, GeneratorKind::Movingai, 2);
            t.config.generator.map_file = Some(fixture.clone());
            t.config.generator.num_agents = n;
            t.config.episode_budget = 20;
            t
        })
        .collect();
    let report = run_protocol(Tier::Hard, &tasks, "zero", &|| Box::new(ZeroPolicy)).unwrap();
    assert_eq!(report.sweep.len(), 2);
    assert_eq!(report.sweep[0].map, "arena");
    assert_eq!(report.sweep.iter().map(|r| r.num_agents).collect::<Vec<_>>(), vec![2, 4]);
    assert_eq!(report.sweep_csv().lines().count(), 3);
}

#[test]
fn task_list_parsing() {
    let text = r#"
tier = "easy"
[[tasks]]
id = "a"
tier = "easy"
episodes = 3
seed = 1
[tasks.config.generator]
kind = "maze_grid"
"#;
    let list = TaskList::from_toml_str(text).unwrap();
    assert_eq!(list.tasks[0].config.generator.kind, GeneratorKind::MazeGrid);
    let err = TaskList::from_toml_str(&text.replace("maze_grid", "nope")).unwrap_err();
    assert_eq!(err.path, "tasks[0].config.generator.kind");
    let err = TaskList::from_toml_str(&text.replace("episodes = 3", "episodes = 0")).unwrap_err();
    assert_eq!(err.path, "tasks[0].episodes");
    let err = TaskList::from_toml_str(&text.replace("kind = \"maze_grid\"", "obstacle_density = 2.0")).unwrap_err();
    assert_eq!(err.path, "tasks[0].config.generator.obstacle_density");
}
