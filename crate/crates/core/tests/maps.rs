mod common;

use circlenav::env::{reset, EnvConfig};
use circlenav::geometry::{Circle, Vec2};
use circlenav::maps::{
    gen_batched, generate, maze_grid, obstacle_count, parse_map_text, parse_movingai, parse_movingai_grid,
    parse_string_grid, random_grid, write_map_text, GeneratorConfig, GeneratorKind, MapSpec, PlacementSpec,
};
use circlenav::rng::RngKey;
use common::*;

/// Strictly positive surface gaps between every pair of starts, every pair
/// of goals, and every start/goal and landmark.
fn assert_clear(map: &MapSpec, p: &PlacementSpec, what: &str) {
    let gap = |a: Vec2, ra: f64, b: &Circle| {
        let dx = a.x - b.center.x;
        let dy = a.y - b.center.y;
        (dx * dx + dy * dy).sqrt() - ra - b.radius
    };
    for pts in [&p.agent_starts, &p.goals] {
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let other = Circle::new(pts[j], p.agent_radii[j]);
                assert!(gap(pts[i], p.agent_radii[i], &other) > 0.0, "{what}: agents {i},{j} overlap");
            }
            for l in &map.landmarks {
                assert!(gap(pts[i], p.agent_radii[i], l) > 0.0, "{what}: agent {i} touches landmark");
            }
        }
    }
}

#[test]
fn default_grid_has_120_obstacles() {
    assert_eq!(obstacle_count(0.3, 400), 120);
    for seed in 0..20 {
        let g = random_grid(20, 20, 0.3, RngKey::from_seed(seed));
        assert_eq!(g.count(), 120);
        let cfg = GeneratorConfig::default();
        let (map, _) = generate(&cfg, &[], 0, RngKey::from_seed(seed)).unwrap();
        assert_eq!(map.obstacle_cell_count(), 120);
    }
}

#[test]
fn fully_connected_mazes() {
    for seed in 0..100 {
        let g = maze_grid(21, 21, 1.0, RngKey::from_seed(seed));
        assert_eq!(flood_fill_components(&g.inverted()), 1, "seed {seed}");
    }
}

#[test]
fn mazes_stay_connected_at_default_probability() {
    for seed in 0..100 {
        let g = maze_grid(20, 20, 0.65, RngKey::from_seed(seed));
        assert_eq!(flood_fill_components(&g.inverted()), 1, "seed {seed}");
    }
}

const SYNTHETIC_MOVINGAI: &str = "type octile\nheight 4\nwidth 6\nmap\n..@@..\n.TT.S.\nW....G\n@O....\n";

#[test]
fn movingai_glyph_counts() {
    let mut texts = vec![("synthetic".to_string(), SYNTHETIC_MOVINGAI.to_string())];
    for name in ["arena.map", "maze512-32-9.map"] {
        texts.push((name.to_string(), std::fs::read_to_string(fixture(name)).unwrap()));
    }
    let cfg = GeneratorConfig { kind: GeneratorKind::Movingai, ..GeneratorConfig::default() };
    for (name, text) in texts {
        let grid = parse_movingai_grid(&text).unwrap();
        assert_eq!(grid.count(), count_blocked_glyphs(&text), "{name}");
        let map = parse_movingai(&text, &cfg).unwrap();
        let (back, placement) = parse_map_text(&write_map_text(&map, None)).unwrap();
        assert!(placement.is_none());
        assert_eq!(back.obstacles, map.obstacles, "{name}");
        assert_eq!(back.landmarks, map.landmarks, "{name}");
    }
}

#[test]
fn movingai_rejects_bad_input() {
    assert!(parse_movingai_grid("type octile\nheight 2\nwidth 2\nmap\n..\n").is_err());
    assert!(parse_movingai_grid("type octile\nheight 1\nwidth 2\nmap\n.x\n").is_err());
    assert!(parse_movingai_grid("height 1\nwidth 2\nmap\n..\n").is_err());
}

#[test]
fn resets_are_collision_free() {
    let kinds = [
        GeneratorKind::RandomGrid,
        GeneratorKind::MazeGrid,
        GeneratorKind::CavesCont,
        GeneratorKind::HeteroGiveWay,
    ];
    for draw in 0..1000u64 {
        let kind = kinds[(draw % 4) as usize];
        let mut cfg = EnvConfig::default();
        cfg.generator.kind = kind;
        cfg.generator.agent_radius = [0.08, 0.15];
        cfg.generator.num_diffdrive = 2;
        // the default noise threshold occasionally leaves too little open cave
        cfg.generator.noise_threshold = 0.2;
        let (state, _) = reset(&cfg, draw).unwrap();
        let p = PlacementSpec {
            agent_starts: state.positions(),
            goals: state.goals.clone(),
            agent_radii: state.agents.iter().map(|a| a.radius).collect(),
            agent_models: state.agents.iter().map(|a| a.model).collect(),
        };
        let map = MapSpec::from_landmarks("check", circlenav::Bounds::new(Vec2::ZERO, Vec2::ZERO), state.landmarks.to_vec());
        assert_clear(&map, &p, &format!("{} draw {draw}", kind.name()));
    }
}

#[test]
fn string_grid_restricts_starts_and_goals() {
    let cfg = GeneratorConfig { kind: GeneratorKind::StringGrid, num_agents: 2, ..GeneratorConfig::default() };
    let map = parse_string_grid("#######\n#a...g#\n#a...g#\n#######\n", &cfg).unwrap();
    for seed in 0..50 {
        let (_, p) = generate(&cfg, std::slice::from_ref(&map), 0, RngKey::from_seed(seed)).unwrap();
        for s in &p.agent_starts {
            assert_eq!((s.x / cfg.cell_size).floor() as usize, 1);
        }
        for g in &p.goals {
            assert_eq!((g.x / cfg.cell_size).floor() as usize, 5);
        }
    }
}

#[test]
fn batched_slots_do_not_depend_on_batch_size() {
    let cfg = GeneratorConfig { num_agents: 3, ..GeneratorConfig::default() };
    let layouts = vec![
        parse_string_grid("......\n.#..#.\n......\n", &cfg).unwrap(),
        parse_string_grid("......\n......\n.####.\n......\n", &cfg).unwrap(),
    ];
    let key = RngKey::from_seed(11);
    let small = gen_batched(&layouts, &cfg, key, 3).unwrap();
    let large = gen_batched(&layouts, &cfg, key, 9).unwrap();
    assert_eq!(small[..], large[..3]);
    assert_eq!(large, gen_batched(&layouts, &cfg, key, 9).unwrap());
    assert_eq!(large[4].0.layout_id, layouts[0].layout_id);
    for (m, p) in &large {
        assert_clear(m, p, "batched");
    }
}

#[test]
fn map_text_round_trip_with_placement() {
    for kind in [GeneratorKind::RandomGrid, GeneratorKind::MazeGrid, GeneratorKind::CavesCont] {
        let cfg = GeneratorConfig { kind, ..GeneratorConfig::default() };
        let (map, p) = generate(&cfg, &[], 0, RngKey::from_seed(3)).unwrap();
        let (back, bp) = parse_map_text(&write_map_text(&map, Some(&p))).unwrap();
        assert_eq!(back.landmarks, map.landmarks, "{}", kind.name());
        assert_eq!(bp.unwrap(), p, "{}", kind.name());
    }
}

#[test]
fn generators_are_deterministic() {
    for kind in [GeneratorKind::RandomGrid, GeneratorKind::MazeGrid, GeneratorKind::CavesCont] {
        let cfg = GeneratorConfig { kind, ..GeneratorConfig::default() };
        let a = generate(&cfg, &[], 0, RngKey::from_seed(9)).unwrap();
        let b = generate(&cfg, &[], 0, RngKey::from_seed(9)).unwrap();
        assert_eq!(a, b);
        let c = generate(&cfg, &[], 0, RngKey::from_seed(10)).unwrap();
        assert_ne!(a.1, c.1);
    }
}
