//! Map generators, text map formats and start/goal placement.
//!
//! Every grid map uses the same frame: cell `(row, col)` covers
//! `[col·s, (col+1)·s] × [row·s, (row+1)·s]` for cell size `s`, so the
//! first text row of a layout sits at the smallest `y`.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsModel;
use crate::geometry::{grid_to_circles, surface_distance, BoolGrid, Bounds, Circle, SpatialHash, Vec2};
use crate::rng::{RngKey, RngStream};

/// Attempts per entity before placement gives up.
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    RandomGrid,
    MazeGrid,
    CavesCont,
    StringGrid,
    BatchedStringGrid,
    Movingai,
    HeteroGiveWay,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 7] = [
        GeneratorKind::RandomGrid,
        GeneratorKind::MazeGrid,
        GeneratorKind::CavesCont,
        GeneratorKind::StringGrid,
        GeneratorKind::BatchedStringGrid,
        GeneratorKind::Movingai,
        GeneratorKind::HeteroGiveWay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::RandomGrid => "random_grid",
            GeneratorKind::MazeGrid => "maze_grid",
            GeneratorKind::CavesCont => "caves_cont",
            GeneratorKind::StringGrid => "string_grid",
            GeneratorKind::BatchedStringGrid => "batched_string_grid",
            GeneratorKind::Movingai => "movingai",
            GeneratorKind::HeteroGiveWay => "hetero_give_way",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub rows: usize,
    pub cols: usize,
    pub obstacle_density: f64,
    pub extra_connection_probability: f64,
    pub noise_threshold: f64,
    /// Perlin lattice cells per grid cell.
    pub noise_frequency: f64,
    pub num_agents: usize,
    /// Agent radii are drawn uniformly from `[lo, hi]`.
    pub agent_radius: [f64; 2],
    /// The last `num_diffdrive` agents use differential drive.
    pub num_diffdrive: usize,
    pub cell_size: f64,
    pub granularity: usize,
    /// Inline layout for `string_grid`.
    pub layout: Option<String>,
    /// Inline layouts for `batched_string_grid`.
    pub layouts: Vec<String>,
    /// Layout file for `string_grid` or `movingai`.
    pub map_file: Option<PathBuf>,
    /// Layout files for `batched_string_grid`.
    pub map_files: Vec<PathBuf>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::RandomGrid,
            rows: 20,
            cols: 20,
            obstacle_density: 0.3,
            extra_connection_probability: 0.65,
            noise_threshold: 0.0,
            noise_frequency: 0.1,
            num_agents: 8,
            agent_radius: [0.1, 0.1],
            num_diffdrive: 0,
            cell_size: 0.4,
            granularity: 1,
            layout: None,
            layouts: Vec::new(),
            map_file: None,
            map_files: Vec::new(),
        }
    }
}

impl GeneratorConfig {
    /// Range checks, reported as `(field, message)`.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.obstacle_density) {
            return Err(("obstacle_density", format!("must be in [0, 1], got {}", self.obstacle_density)));
        }
        if !unit(self.extra_connection_probability) {
            return Err((
                "extra_connection_probability",
                format!("must be in [0, 1], got {}", self.extra_connection_probability),
            ));
        }
        if !(-1.0..=1.0).contains(&self.noise_threshold) {
            return Err(("noise_threshold", format!("must be in [-1, 1], got {}", self.noise_threshold)));
        }
        if !(self.noise_frequency > 0.0 && self.noise_frequency.is_finite()) {
            return Err(("noise_frequency", "must be positive".into()));
        }
        if self.num_agents == 0 {
            return Err(("num_agents", "must be at least 1".into()));
        }
        if self.num_diffdrive > self.num_agents {
            return Err(("num_diffdrive", "exceeds num_agents".into()));
        }
        let [lo, hi] = self.agent_radius;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(("agent_radius", format!("need 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(("cell_size", "must be positive".into()));
        }
        if self.granularity == 0 {
            return Err(("granularity", "must be at least 1".into()));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(("rows", "grid must be non-empty".into()));
        }
        Ok(())
    }

    pub fn agent_models(&self) -> Vec<DynamicsModel> {
        (0..self.num_agents)
            .map(|i| {
                if i + self.num_diffdrive >= self.num_agents {
                    DynamicsModel::DiffDrive
                } else {
                    DynamicsModel::Holonomic
                }
            })
            .collect()
    }
}

/// Static part of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub layout_id: String,
    pub bounds: Bounds,
    pub cell_size: f64,
    pub granularity: usize,
    pub landmarks: Vec<Circle>,
    /// Obstacle cells of grid-derived maps.
    pub obstacles: Option<BoolGrid>,
    /// Cells where starts and goals may be sampled.
    pub free_cells: Option<BoolGrid>,
    /// Optional restriction of `free_cells` for starts.
    pub start_cells: Option<BoolGrid>,
    /// Optional restriction of `free_cells` for goals.
    pub goal_cells: Option<BoolGrid>,
}

impl MapSpec {
    /// Grid map whose free cells are all placeable.
    pub fn from_grid(kind: &str, obstacles: BoolGrid, cell_size: f64, granularity: usize) -> Self {
        let bounds = Bounds::new(
            Vec2::ZERO,
            Vec2::new(
                obstacles.width() as f64 * cell_size,
                obstacles.height() as f64 * cell_size,
            ),
        );
        Self {
            layout_id: grid_layout_id(kind, &obstacles),
            bounds,
            cell_size,
            granularity,
            landmarks: grid_to_circles(&obstacles, cell_size, granularity),
            free_cells: Some(obstacles.inverted()),
            obstacles: Some(obstacles),
            start_cells: None,
            goal_cells: None,
        }
    }

    /// Map with explicit landmarks and no grid.
    pub fn from_landmarks(layout_id: impl Into<String>, bounds: Bounds, landmarks: Vec<Circle>) -> Self {
        Self {
            layout_id: layout_id.into(),
            bounds,
            cell_size: 1.0,
            granularity: 1,
            landmarks,
            obstacles: None,
            free_cells: None,
            start_cells: None,
            goal_cells: None,
        }
    }

    pub fn empty(bounds: Bounds) -> Self {
        Self::from_landmarks("empty", bounds, Vec::new())
    }

    pub fn obstacle_cell_count(&self) -> usize {
        self.obstacles.as_ref().map_or(0, BoolGrid::count)
    }

    /// Cell-center position of `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }
}

/// Stable identifier derived from the kind and the obstacle cells.
fn grid_layout_id(kind: &str, grid: &BoolGrid) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &c in grid.cells() {
        h ^= c as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{kind}-{}x{}-{:08x}", grid.height(), grid.width(), h as u32)
}

/// Per-episode dynamic setup: where agents start and where they go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub agent_starts: Vec<Vec2>,
    pub goals: Vec<Vec2>,
    pub agent_radii: Vec<f64>,
    pub agent_models: Vec<DynamicsModel>,
}

impl PlacementSpec {
    pub fn num_agents(&self) -> usize {
        self.agent_starts.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("could not place {entity} {index} after {attempts} attempts")]
    PlacementExhausted {
        entity: &'static str,
        index: usize,
        attempts: usize,
    },
    #[error("placeable free space has {free} cells, need at least {needed}")]
    DegenerateMap { free: usize, needed: usize },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedGrid {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: unknown glyph {glyph:?}")]
    UnknownGlyph {
        line: usize,
        column: usize,
        glyph: char,
    },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("invalid generator config: {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<MapError>,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed map text at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> MapError {
    MapError::InvalidConfig {
        field,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// placement

/// Samples candidate positions uniformly over a set of cells (or the whole
/// bounds when there is no cell mask).
struct PointSampler {
    cells: Vec<(usize, usize)>,
    cell_size: f64,
    bounds: Bounds,
}

impl PointSampler {
    fn new(map: &MapSpec, mask: Option<&BoolGrid>) -> Self {
        let cells = match (mask, map.free_cells.as_ref()) {
            (Some(m), Some(free)) => m
                .set_cells()
                .into_iter()
                .filter(|&(r, c)| free.get(r, c))
                .collect(),
            (Some(m), None) => m.set_cells(),
            (None, Some(free)) => free.set_cells(),
            (None, None) => Vec::new(),
        };
        Self {
            cells,
            cell_size: map.cell_size,
            bounds: map.bounds,
        }
    }

    fn has_grid(&self) -> bool {
        !self.cells.is_empty()
    }

    fn sample(&self, s: &mut RngStream) -> Vec2 {
        if self.cells.is_empty() {
            let x = s.uniform(self.bounds.min.x, self.bounds.max.x);
            let y = s.uniform(self.bounds.min.y, self.bounds.max.y);
            return Vec2::new(x, y);
        }
        let (r, c) = self.cells[s.index(self.cells.len())];
        let x = (c as f64 + s.next_f64()) * self.cell_size;
        let y = (r as f64 + s.next_f64()) * self.cell_size;
        Vec2::new(x, y)
    }
}

struct Placer<'a> {
    map: &'a MapSpec,
    landmark_hash: SpatialHash,
    scratch: Vec<u32>,
}

impl<'a> Placer<'a> {
    fn new(map: &'a MapSpec) -> Self {
        let cell = if map.landmarks.is_empty() {
            1.0
        } else {
            (map.cell_size / map.granularity as f64).max(1e-6)
        };
        Self {
            map,
            landmark_hash: SpatialHash::build(cell, &map.landmarks),
            scratch: Vec::new(),
        }
    }

    fn clear_of_landmarks(&mut self, c: &Circle) -> bool {
        self.landmark_hash.query_into(c, 0.0, &mut self.scratch);
        self.scratch
            .iter()
            .all(|&j| surface_distance(c, &self.map.landmarks[j as usize]) > 0.0)
    }

    fn place(
        &mut self,
        entity: &'static str,
        radii: &[f64],
        sampler: &PointSampler,
        s: &mut RngStream,
    ) -> Result<Vec<Vec2>, MapError> {
        let mut placed: Vec<Circle> = Vec::with_capacity(radii.len());
        for (index, &radius) in radii.iter().enumerate() {
            let mut ok = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let c = Circle::new(sampler.sample(s), radius);
                if !self.map.bounds.contains_circle(&c) {
                    continue;
                }
                if placed.iter().any(|o| surface_distance(&c, o) <= 0.0) {
                    continue;
                }
                if !self.clear_of_landmarks(&c) {
                    continue;
                }
                ok = Some(c);
                break;
            }
            match ok {
                Some(c) => placed.push(c),
                None => {
                    return Err(MapError::PlacementExhausted {
                        entity,
                        index,
                        attempts: PLACEMENT_ATTEMPTS,
                    })
                }
            }
        }
        Ok(placed.into_iter().map(|c| c.center).collect())
    }
}

/// Rejection-samples starts and goals on `map`. Starts never overlap each
/// other or a landmark; the same holds for goals. Each entity gets
/// [`PLACEMENT_ATTEMPTS`] tries.
pub fn place_agents(map: &MapSpec, cfg: &GeneratorConfig, rng: RngKey) -> Result<PlacementSpec, MapError> {
    let (radius_key, start_key, goal_key) = rng.split3();
    let mut rs = radius_key.stream();
    let [lo, hi] = cfg.agent_radius;
    let radii: Vec<f64> = (0..cfg.num_agents)
        .map(|_| if hi > lo { rs.uniform(lo, hi) } else { lo })
        .collect();
    place_with_radii(map, radii, cfg.agent_models(), start_key, goal_key)
}

fn place_with_radii(
    map: &MapSpec,
    radii: Vec<f64>,
    models: Vec<DynamicsModel>,
    start_key: RngKey,
    goal_key: RngKey,
) -> Result<PlacementSpec, MapError> {
    let mut placer = Placer::new(map);
    let start_sampler = PointSampler::new(map, map.start_cells.as_ref());
    let goal_sampler = PointSampler::new(map, map.goal_cells.as_ref());
    if map.free_cells.is_some() && (!start_sampler.has_grid() || !goal_sampler.has_grid()) {
        return Err(MapError::DegenerateMap {
            free: 0,
            needed: radii.len(),
        });
    }
    let agent_starts = placer.place("start", &radii, &start_sampler, &mut start_key.stream())?;
    let goals = placer.place("goal", &radii, &goal_sampler, &mut goal_key.stream())?;
    Ok(PlacementSpec {
        agent_starts,
        goals,
        agent_radii: radii,
        agent_models: models,
    })
}

// ---------------------------------------------------------------------------
// generators

/// Obstacle count for a density, robust to products like `0.3 · 400` that
/// land a hair below an integer.
pub fn obstacle_count(density: f64, cells: usize) -> usize {
    ((density * cells as f64) + 1e-9).floor().min(cells as f64) as usize
}

pub fn random_grid(rows: usize, cols: usize, density: f64, rng: RngKey) -> BoolGrid {
    let mut grid = BoolGrid::new(rows, cols);
    let n = obstacle_count(density, rows * cols);
    for i in rng.stream().sample_indices(rows * cols, n) {
        grid.set(i / cols, i % cols, true);
    }
    grid
}

/// Uniform obstacle cells without replacement, then placement.
pub fn gen_random_grid(cfg: &GeneratorConfig, rng: RngKey) -> Result<(MapSpec, PlacementSpec), MapError> {
    check(cfg)?;
    let (map_key, place_key) = rng.split2();
    let grid = random_grid(cfg.rows, cfg.cols, cfg.obstacle_density, map_key);
    let map = MapSpec::from_grid("random_grid", grid, cfg.cell_size, cfg.granularity);
    let placement = place_agents(&map, cfg, place_key)?;
    Ok((map, placement))
}

fn check(cfg: &GeneratorConfig) -> Result<(), MapError> {
    cfg.validate().map_err(|(f, m)| invalid(f, m))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Room-and-corridor maze.
///
/// Junctions sit on odd `(row, col)` cells. Rectangular rooms of 1..=3
/// junctions per side are placed without touching each other, a randomized
/// Kruskal spanning tree links every junction, and then each still-closed
/// wall next to a room is opened with probability `extra`. The spanning
/// tree makes the free space one 4-connected component for every `extra`.
pub fn maze_grid(rows: usize, cols: usize, extra: f64, rng: RngKey) -> BoolGrid {
    assert!(rows >= 7 && cols >= 7, "maze needs at least 7x7 cells");
    let (room_key, edge_key, extra_key) = rng.split3();
    let nr = (rows - 1) / 2;
    let nc = (cols - 1) / 2;
    let node = |i: usize, j: usize| i * nc + j;
    let mut grid = BoolGrid::filled(rows, cols, true);
    for i in 0..nr {
        for j in 0..nc {
            grid.set(2 * i + 1, 2 * j + 1, false);
        }
    }

    let mut room_of: Vec<Option<usize>> = vec![None; nr * nc];
    let mut rooms: Vec<(usize, usize, usize, usize)> = Vec::new();
    let target = (nr * nc / 12).max(1);
    let mut s = room_key.stream();
    for _ in 0..target * 8 {
        if rooms.len() == target {
            break;
        }
        let h = 1 + s.index(nr.min(3));
        let w = 1 + s.index(nc.min(3));
        let i0 = s.index(nr - h + 1);
        let j0 = s.index(nc - w + 1);
        // keep one junction of spacing between rooms
        let clash = rooms.iter().any(|&(ri, rj, rh, rw)| {
            i0 <= ri + rh && ri <= i0 + h && j0 <= rj + rw && rj <= j0 + w
        });
        if clash {
            continue;
        }
        let id = rooms.len();
        rooms.push((i0, j0, h, w));
        for i in i0..i0 + h {
            for j in j0..j0 + w {
                room_of[node(i, j)] = Some(id);
            }
        }
        for r in 2 * i0 + 1..=2 * (i0 + h - 1) + 1 {
            for c in 2 * j0 + 1..=2 * (j0 + w - 1) + 1 {
                grid.set(r, c, false);
            }
        }
    }

    let mut sets = DisjointSet::new(nr * nc);
    for (id, &(i0, j0, h, w)) in rooms.iter().enumerate() {
        let _ = id;
        for i in i0..i0 + h {
            for j in j0..j0 + w {
                sets.union(node(i0, j0), node(i, j));
            }
        }
    }

    // edges between neighbouring junctions: (a, b, wall row, wall col)
    let mut edges: Vec<(usize, usize, usize, usize)> = Vec::new();
    for i in 0..nr {
        for j in 0..nc {
            if j + 1 < nc {
                edges.push((node(i, j), node(i, j + 1), 2 * i + 1, 2 * j + 2));
            }
            if i + 1 < nr {
                edges.push((node(i, j), node(i + 1, j), 2 * i + 2, 2 * j + 1));
            }
        }
    }
    edge_key.stream().shuffle(&mut edges);
    for &(a, b, r, c) in &edges {
        if sets.union(a, b) {
            grid.set(r, c, false);
        }
    }

    let mut xs = extra_key.stream();
    edges.sort_unstable_by_key(|&(_, _, r, c)| (r, c));
    for &(a, b, r, c) in &edges {
        if !grid.get(r, c) {
            continue;
        }
        let near_room = room_of[a].is_some() || room_of[b].is_some();
        let same_room = room_of[a].is_some() && room_of[a] == room_of[b];
        if near_room && !same_room && xs.bernoulli(extra) {
            grid.set(r, c, false);
        }
    }
    grid
}

pub fn gen_maze_grid(cfg: &GeneratorConfig, rng: RngKey) -> Result<(MapSpec, PlacementSpec), MapError> {
    check(cfg)?;
    if cfg.rows < 7 || cfg.cols < 7 {
        return Err(invalid("rows", "maze_grid needs at least 7x7 cells"));
    }
    let (map_key, place_key) = rng.split2();
    let grid = maze_grid(cfg.rows, cfg.cols, cfg.extra_connection_probability, map_key);
    let map = MapSpec::from_grid("maze_grid", grid, cfg.cell_size, cfg.granularity);
    let placement = place_agents(&map, cfg, place_key)?;
    Ok((map, placement))
}

/// Classic 2D Perlin gradient noise over a seeded permutation table.
///
/// Gradients are the 8 unit vectors at multiples of 45°, interpolation uses
/// the quintic fade `6t⁵ − 15t⁴ + 10t³`. Output lies in roughly
/// `[−0.71, 0.71]` and is exactly 0 on integer lattice points.
#[derive(Debug, Clone)]
pub struct Perlin {
    perm: [u8; 512],
}

impl Perlin {
    pub fn new(rng: RngKey) -> Self {
        let mut table: Vec<u8> = (0..=255u8).collect();
        rng.stream().shuffle(&mut table);
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        Self { perm }
    }

    fn gradient(hash: u8, x: f64, y: f64) -> f64 {
        const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
        match hash & 7 {
            0 => x,
            1 => -x,
            2 => y,
            3 => -y,
            4 => D * (x + y),
            5 => D * (-x + y),
            6 => D * (x - y),
            _ => D * (-x - y),
        }
    }

    pub fn noise(&self, x: f64, y: f64) -> f64 {
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
        let (xf, yf) = (x.floor(), y.floor());
        let xi = (xf as i64 & 255) as usize;
        let yi = (yf as i64 & 255) as usize;
        let (dx, dy) = (x - xf, y - yf);
        let p = &self.perm;
        let aa = p[p[xi] as usize + yi];
        let ab = p[p[xi] as usize + yi + 1];
        let ba = p[p[xi + 1] as usize + yi];
        let bb = p[p[xi + 1] as usize + yi + 1];
        let u = fade(dx);
        let v = fade(dy);
        let x1 = lerp(Self::gradient(aa, dx, dy), Self::gradient(ba, dx - 1.0, dy), u);
        let x2 = lerp(
            Self::gradient(ab, dx, dy - 1.0),
            Self::gradient(bb, dx - 1.0, dy - 1.0),
            u,
        );
        lerp(x1, x2, v).clamp(-1.0, 1.0)
    }
}

/// Cells whose noise (sampled at cell centers) exceeds `threshold` become
/// obstacles.
pub fn caves_grid(rows: usize, cols: usize, threshold: f64, frequency: f64, rng: RngKey) -> BoolGrid {
    let noise = Perlin::new(rng);
    let mut grid = BoolGrid::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = noise.noise((c as f64 + 0.5) * frequency, (r as f64 + 0.5) * frequency);
            grid.set(r, c, v > threshold);
        }
    }
    grid
}

/// Largest 4-connected free component (lowest label wins ties).
pub fn largest_free_component(obstacles: &BoolGrid) -> BoolGrid {
    let free = obstacles.inverted();
    let (labels, sizes) = free.components();
    let mut out = BoolGrid::new(obstacles.height(), obstacles.width());
    let Some(best) = (0..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))) else {
        return out;
    };
    for (i, l) in labels.iter().enumerate() {
        if *l == Some(best) {
            out.set(i / obstacles.width(), i % obstacles.width(), true);
        }
    }
    out
}

pub fn gen_caves(cfg: &GeneratorConfig, rng: RngKey) -> Result<(MapSpec, PlacementSpec), MapError> {
    check(cfg)?;
    let (map_key, place_key) = rng.split2();
    let grid = caves_grid(cfg.rows, cfg.cols, cfg.noise_threshold, cfg.noise_frequency, map_key);
    let placeable = largest_free_component(&grid);
    let needed = 4 * cfg.num_agents;
    if placeable.count() < needed {
        return Err(MapError::DegenerateMap {
            free: placeable.count(),
            needed,
        });
    }
    let mut map = MapSpec::from_grid("caves_cont", grid, cfg.cell_size, cfg.granularity);
    map.free_cells = Some(placeable);
    let placement = place_agents(&map, cfg, place_key)?;
    Ok((map, placement))
}

// ---------------------------------------------------------------------------
// text formats

#[derive(Debug, Clone, PartialEq)]
struct GlyphGrid {
    obstacles: BoolGrid,
    starts: Option<BoolGrid>,
    goals: Option<BoolGrid>,
}

/// Parses a `.`/`#`/`a`/`g` layout (and `b` = start and goal when
/// `allow_both`). Blank lines are skipped; `first_line` numbers errors.
fn parse_glyph_rows(lines: &[(usize, &str)], allow_both: bool) -> Result<GlyphGrid, MapError> {
    let width = lines.first().map_or(0, |(_, l)| l.chars().count());
    let height = lines.len();
    if height == 0 || width == 0 {
        return Err(MapError::Malformed {
            line: 1,
            message: "empty layout".into(),
        });
    }
    let mut obstacles = BoolGrid::new(height, width);
    let mut starts = BoolGrid::new(height, width);
    let mut goals = BoolGrid::new(height, width);
    for (row, &(line_no, line)) in lines.iter().enumerate() {
        let found = line.chars().count();
        if found != width {
            return Err(MapError::RaggedGrid {
                line: line_no,
                expected: width,
                found,
            });
        }
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '.' => {}
                '#' => obstacles.set(row, col, true),
                'a' => starts.set(row, col, true),
                'g' => goals.set(row, col, true),
                'b' if allow_both => {
                    starts.set(row, col, true);
                    goals.set(row, col, true);
                }
                _ => {
                    return Err(MapError::UnknownGlyph {
                        line: line_no,
                        column: col + 1,
                        glyph: ch,
                    })
                }
            }
        }
    }
    Ok(GlyphGrid {
        obstacles,
        starts: (starts.count() > 0).then_some(starts),
        goals: (goals.count() > 0).then_some(goals),
    })
}

fn numbered_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .collect()
}

/// Text layout: `#` obstacle, `.` free, `a` allowed start, `g` allowed goal.
/// When any `a` (or `g`) is present, starts (or goals) are restricted to
/// those cells.
pub fn parse_string_grid(text: &str, cfg: &GeneratorConfig) -> Result<MapSpec, MapError> {
    let lines: Vec<(usize, &str)> = numbered_lines(text)
        .into_iter()
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let g = parse_glyph_rows(&lines, false)?;
    let mut map = MapSpec::from_grid("string_grid", g.obstacles, cfg.cell_size, cfg.granularity);
    map.start_cells = g.starts;
    map.goal_cells = g.goals;
    Ok(map)
}

/// Is `glyph` an obstacle in the MovingAI alphabet? `None` for unknown glyphs.
pub fn movingai_glyph(glyph: char) -> Option<bool> {
    match glyph {
        '.' | 'G' => Some(false),
        '@' | 'O' | 'T' | 'S' | 'W' => Some(true),
        _ => None,
    }
}

/// Parses the MovingAI `.map` format (`type`, `height`, `width`, `map`
/// header, then `height` rows of `width` glyphs). Swamp and water count as
/// obstacles.
pub fn parse_movingai(text: &str, cfg: &GeneratorConfig) -> Result<MapSpec, MapError> {
    let grid = parse_movingai_grid(text)?;
    Ok(MapSpec::from_grid("movingai", grid, cfg.cell_size, cfg.granularity))
}

pub fn parse_movingai_grid(text: &str) -> Result<BoolGrid, MapError> {
    let lines = numbered_lines(text);
    let mut it = lines.iter();
    let mut header = |key: &str| -> Result<String, MapError> {
        let (n, line) = it
            .next()
            .ok_or_else(|| MapError::HeaderMismatch(format!("missing `{key}` line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(MapError::HeaderMismatch(format!(
                "line {n}: expected `{key}`, found {line:?}"
            )));
        }
        Ok(parts.collect::<Vec<_>>().join(" "))
    };
    header("type")?;
    let dim = |s: String, key: &str| -> Result<usize, MapError> {
        s.parse()
            .map_err(|_| MapError::HeaderMismatch(format!("bad {key} value {s:?}")))
    };
    let height = dim(header("height")?, "height")?;
    let width = dim(header("width")?, "width")?;
    header("map")?;
    let rows: Vec<&(usize, &str)> = it.filter(|(_, l)| !l.is_empty()).collect();
    if rows.len() != height {
        return Err(MapError::HeaderMismatch(format!(
            "header says height {height} but {} rows follow",
            rows.len()
        )));
    }
    let mut grid = BoolGrid::new(height, width);
    for (r, &&(line_no, line)) in rows.iter().enumerate() {
        let n = line.chars().count();
        if n != width {
            return Err(MapError::HeaderMismatch(format!(
                "line {line_no}: header says width {width} but row has {n} cells"
            )));
        }
        for (c, ch) in line.chars().enumerate() {
            match movingai_glyph(ch) {
                Some(blocked) => grid.set(r, c, blocked),
                None => {
                    return Err(MapError::UnknownGlyph {
                        line: line_no,
                        column: c + 1,
                        glyph: ch,
                    })
                }
            }
        }
    }
    Ok(grid)
}

const MAP_MAGIC: &str = "circlenav-map 1";

/// Canonical text form of a map and, optionally, a placement. Grid maps are
/// written as glyph rows (`b` marks a cell allowed for both starts and
/// goals); other maps as an explicit landmark list. Floats use the shortest
/// representation that reads back to the same value.
pub fn write_map_text(map: &MapSpec, placement: Option<&PlacementSpec>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAP_MAGIC}");
    let _ = writeln!(out, "layout {}", map.layout_id);
    let _ = writeln!(out, "cell_size {}", map.cell_size);
    let _ = writeln!(out, "granularity {}", map.granularity);
    let b = map.bounds;
    let _ = writeln!(out, "bounds {} {} {} {}", b.min.x, b.min.y, b.max.x, b.max.y);
    if let Some(grid) = &map.obstacles {
        let _ = writeln!(out, "grid {} {}", grid.height(), grid.width());
        let placeable = map.free_cells.as_ref();
        for r in 0..grid.height() {
            for c in 0..grid.width() {
                let s = map.start_cells.as_ref().is_some_and(|m| m.get(r, c));
                let g = map.goal_cells.as_ref().is_some_and(|m| m.get(r, c));
                let ch = if grid.get(r, c) {
                    '#'
                } else if s && g {
                    'b'
                } else if s {
                    'a'
                } else if g {
                    'g'
                } else if placeable.is_some_and(|p| !p.get(r, c)) {
                    'x'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
    } else {
        let _ = writeln!(out, "landmarks {}", map.landmarks.len());
        for l in &map.landmarks {
            let _ = writeln!(out, "{} {} {}", l.center.x, l.center.y, l.radius);
        }
    }
    if let Some(p) = placement {
        let _ = writeln!(out, "agents {}", p.num_agents());
        for i in 0..p.num_agents() {
            let model = match p.agent_models[i] {
                DynamicsModel::Holonomic => "holonomic",
                DynamicsModel::DiffDrive => "diff_drive",
            };
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                p.agent_starts[i].x, p.agent_starts[i].y, p.agent_radii[i], model, p.goals[i].x, p.goals[i].y
            );
        }
    }
    out
}

struct LineCursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    fn malformed(line: usize, message: impl Into<String>) -> MapError {
        MapError::Malformed {
            line,
            message: message.into(),
        }
    }

    fn raw(&mut self) -> Result<(usize, &'a str), MapError> {
        let item = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Self::malformed(self.pos + 1, "unexpected end of text"))?;
        self.pos += 1;
        Ok(item)
    }

    /// Next line split into fields; the first field must equal `key` unless
    /// `key` is empty.
    fn fields(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), MapError> {
        let (n, line) = self.raw()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if !key.is_empty() && parts.first() != Some(&key) {
            return Err(Self::malformed(n, format!("expected `{key}`")));
        }
        Ok((n, parts))
    }

    fn skip_blank(&mut self) {
        while self.lines.get(self.pos).is_some_and(|(_, l)| l.trim().is_empty()) {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.lines.len()
    }
}

fn field<T: std::str::FromStr>(line: usize, parts: &[&str], i: usize) -> Result<T, MapError> {
    parts
        .get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| LineCursor::malformed(line, format!("bad or missing field {}", i + 1)))
}

/// Reads [`write_map_text`] output back.
pub fn parse_map_text(text: &str) -> Result<(MapSpec, Option<PlacementSpec>), MapError> {
    let mut cur = LineCursor {
        lines: numbered_lines(text),
        pos: 0,
    };
    let (n, line) = cur.raw()?;
    if line.trim() != MAP_MAGIC {
        return Err(LineCursor::malformed(n, format!("missing `{MAP_MAGIC}` header")));
    }
    let (n, f) = cur.fields("layout")?;
    let layout_id: String = field(n, &f, 1)?;
    let (n, f) = cur.fields("cell_size")?;
    let cell_size: f64 = field(n, &f, 1)?;
    let (n, f) = cur.fields("granularity")?;
    let granularity: usize = field(n, &f, 1)?;
    let (n, f) = cur.fields("bounds")?;
    let bounds = Bounds::new(
        Vec2::new(field(n, &f, 1)?, field(n, &f, 2)?),
        Vec2::new(field(n, &f, 3)?, field(n, &f, 4)?),
    );
    let (n, f) = cur.fields("")?;
    let mut map = match f.first().copied() {
        Some("grid") => {
            let h: usize = field(n, &f, 1)?;
            let mut rows = Vec::with_capacity(h);
            for _ in 0..h {
                rows.push(cur.raw()?);
            }
            let mut placeable = Vec::new();
            let cleaned: Vec<(usize, String)> = rows
                .iter()
                .map(|&(ln, l)| {
                    placeable.extend(l.chars().map(|c| c != 'x' && c != '#'));
                    (ln, l.replace('x', "."))
                })
                .collect();
            let borrowed: Vec<(usize, &str)> = cleaned.iter().map(|(n, s)| (*n, s.as_str())).collect();
            let g = parse_glyph_rows(&borrowed, true)?;
            let (hh, ww) = (g.obstacles.height(), g.obstacles.width());
            let mut m = MapSpec::from_grid("", g.obstacles, cell_size, granularity);
            m.free_cells = BoolGrid::from_cells(hh, ww, placeable);
            m.start_cells = g.starts;
            m.goal_cells = g.goals;
            m.layout_id = layout_id;
            m.bounds = bounds;
            m
        }
        Some("landmarks") => {
            let count: usize = field(n, &f, 1)?;
            let mut landmarks = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, p) = cur.fields("")?;
                landmarks.push(Circle::new(
                    Vec2::new(field(n, &p, 0)?, field(n, &p, 1)?),
                    field(n, &p, 2)?,
                ));
            }
            let mut m = MapSpec::from_landmarks(layout_id, bounds, landmarks);
            m.cell_size = cell_size;
            m.granularity = granularity;
            m
        }
        _ => return Err(LineCursor::malformed(n, "expected `grid` or `landmarks`")),
    };
    map.granularity = granularity;
    cur.skip_blank();
    if cur.at_end() {
        return Ok((map, None));
    }
    let (n, f) = cur.fields("agents")?;
    let count: usize = field(n, &f, 1)?;
    let mut p = PlacementSpec {
        agent_starts: Vec::with_capacity(count),
        goals: Vec::with_capacity(count),
        agent_radii: Vec::with_capacity(count),
        agent_models: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let (n, f) = cur.fields("")?;
        p.agent_starts.push(Vec2::new(field(n, &f, 0)?, field(n, &f, 1)?));
        p.agent_radii.push(field(n, &f, 2)?);
        p.agent_models.push(match f.get(3) {
            Some(&"holonomic") => DynamicsModel::Holonomic,
            Some(&"diff_drive") => DynamicsModel::DiffDrive,
            _ => return Err(LineCursor::malformed(n, "unknown dynamics model")),
        });
        p.goals.push(Vec2::new(field(n, &f, 4)?, field(n, &f, 5)?));
    }
    Ok((map, Some(p)))
}

// ---------------------------------------------------------------------------
// batched layouts and fixed scenarios

/// Slot `k` gets layout `k % layouts.len()` and placement drawn from
/// `rng.fold_in(k)`, so a slot's result does not depend on the batch size.
pub fn gen_batched(
    layouts: &[MapSpec],
    cfg: &GeneratorConfig,
    rng: RngKey,
    batch: usize,
) -> Result<Vec<(MapSpec, PlacementSpec)>, MapError> {
    if layouts.is_empty() {
        return Err(invalid("layouts", "need at least one layout"));
    }
    check(cfg)?;
    (0..batch)
        .map(|k| {
            let map = layouts[k % layouts.len()].clone();
            let (_, place_key) = rng.fold_in(k as u64).split2();
            place_agents(&map, cfg, place_key)
                .map(|p| (map, p))
                .map_err(|e| MapError::Slot {
                    slot: k,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Corridor two cells high with a one-cell-wide chamber two cells deep
/// below its middle.
pub const GIVE_WAY_LAYOUT: &str = "\
#############
#...........#
#...........#
######.######
######.######
#############
";

/// Two agents swap ends of a corridor that is too narrow for them to pass
/// each other. Agent 0 (radius 0.4·cell) fits into the side chamber, whose
/// entrance half-width is 0.5·cell; agent 1 (radius 0.8·cell) does not.
pub fn gen_hetero_give_way(cfg: &GeneratorConfig) -> Result<(MapSpec, PlacementSpec), MapError> {
    let lines: Vec<(usize, &str)> = numbered_lines(GIVE_WAY_LAYOUT);
    let g = parse_glyph_rows(&lines, false)?;
    let cs = cfg.cell_size;
    let width = g.obstacles.width();
    let mut map = MapSpec::from_grid("hetero_give_way", g.obstacles, cs, 1);
    map.layout_id = "hetero_give_way".into();
    let y = 2.0 * cs;
    let left = Vec2::new(2.5 * cs, y);
    let right = Vec2::new((width as f64 - 2.5) * cs, y);
    let models = if cfg.num_diffdrive >= 1 {
        vec![DynamicsModel::Holonomic, DynamicsModel::DiffDrive]
    } else {
        vec![DynamicsModel::Holonomic; 2]
    };
    let placement = PlacementSpec {
        agent_starts: vec![left, right],
        goals: vec![right, left],
        agent_radii: vec![0.4 * cs, 0.8 * cs],
        agent_models: models,
    };
    Ok((map, placement))
}

/// Half-width of the give-way chamber entrance between the landmark
/// surfaces on either side.
pub fn give_way_chamber_half_width(cell_size: f64) -> f64 {
    // neighbouring wall circles sit two cells apart, each with radius s/2
    (2.0 * cell_size - cell_size) / 2.0
}

/// Free width of the give-way corridor between wall surfaces.
pub fn give_way_corridor_width(cell_size: f64) -> f64 {
    3.0 * cell_size - cell_size
}

// ---------------------------------------------------------------------------
// dispatch

fn read_file(path: &PathBuf) -> Result<String, MapError> {
    std::fs::read_to_string(path).map_err(|e| MapError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// All layouts configured for `batched_string_grid`, inline ones first.
pub fn batched_layouts(cfg: &GeneratorConfig) -> Result<Vec<MapSpec>, MapError> {
    let mut out = Vec::new();
    for text in &cfg.layouts {
        out.push(parse_string_grid(text, cfg)?);
    }
    for path in &cfg.map_files {
        out.push(parse_string_grid(&read_file(path)?, cfg)?);
    }
    if out.is_empty() {
        return Err(invalid("layouts", "batched_string_grid needs layouts or map_files"));
    }
    for m in &mut out {
        m.layout_id = m.layout_id.replacen("string_grid", "batched_string_grid", 1);
    }
    Ok(out)
}

/// Loads the static layout of file- or text-based generators.
pub fn load_layout(cfg: &GeneratorConfig) -> Result<Option<MapSpec>, MapError> {
    match cfg.kind {
        GeneratorKind::StringGrid => {
            let text = match (&cfg.layout, &cfg.map_file) {
                (Some(t), _) => t.clone(),
                (None, Some(p)) => read_file(p)?,
                (None, None) => return Err(invalid("layout", "string_grid needs layout or map_file")),
            };
            parse_string_grid(&text, cfg).map(Some)
        }
        GeneratorKind::Movingai => {
            let path = cfg
                .map_file
                .as_ref()
                .ok_or_else(|| invalid("map_file", "movingai needs map_file"))?;
            let mut map = parse_movingai(&read_file(path)?, cfg)?;
            if let Some(stem) = path.file_stem() {
                map.layout_id = format!("movingai-{}", stem.to_string_lossy());
            }
            Ok(Some(map))
        }
        _ => Ok(None),
    }
}

/// Generates the map and placement for one environment slot. `layouts`
/// holds the pre-loaded layouts of text-based generators (see
/// [`load_layout`] and [`batched_layouts`]); procedural generators ignore it.
pub fn generate(
    cfg: &GeneratorConfig,
    layouts: &[MapSpec],
    slot: usize,
    rng: RngKey,
) -> Result<(MapSpec, PlacementSpec), MapError> {
    check(cfg)?;
    match cfg.kind {
        GeneratorKind::RandomGrid => gen_random_grid(cfg, rng),
        GeneratorKind::MazeGrid => gen_maze_grid(cfg, rng),
        GeneratorKind::CavesCont => gen_caves(cfg, rng),
        GeneratorKind::HeteroGiveWay => gen_hetero_give_way(cfg),
        GeneratorKind::StringGrid | GeneratorKind::Movingai | GeneratorKind::BatchedStringGrid => {
            if layouts.is_empty() {
                return Err(invalid("layout", "no layout loaded"));
            }
            let map = layouts[slot % layouts.len()].clone();
            let (_, place_key) = rng.split2();
            let placement = place_agents(&map, cfg, place_key)?;
            Ok((map, placement))
        }
    }
}

/// Checks that starts are pairwise clear, goals are pairwise clear and no
/// start or goal touches a landmark.
pub fn placement_is_clear(map: &MapSpec, p: &PlacementSpec) -> bool {
    let circles = |pts: &[Vec2]| -> Vec<Circle> {
        pts.iter()
            .zip(&p.agent_radii)
            .map(|(&c, &r)| Circle::new(c, r))
            .collect()
    };
    [circles(&p.agent_starts), circles(&p.goals)].iter().all(|set| {
        set.iter().enumerate().all(|(i, a)| {
            set[i + 1..].iter().all(|b| surface_distance(a, b) > 0.0)
                && map.landmarks.iter().all(|l| surface_distance(a, l) > 0.0)
        })
    })
}
