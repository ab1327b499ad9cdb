//! RRT and RRT* in configuration space (landmarks inflated by the agent
//! radius), a PD waypoint follower, and path-derived guidance features.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::AgentKinematics;
use crate::geometry::{segment_circle_clearance, Bounds, Circle, SpatialHash, Vec2};
use crate::maps::MapSpec;
use crate::rng::{RngKey, RngStream};

pub const RRT_ITERATIONS: usize = 50_000;
pub const RRT_STAR_ITERATIONS: usize = 3_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerParams {
    pub iterations: usize,
    pub step_size: f64,
    pub goal_bias: f64,
    pub goal_tolerance: f64,
    /// RRT* neighbourhood constant; `None` means 1.5 × the bounds diagonal.
    pub rewire_gamma: Option<f64>,
}

impl PlannerParams {
    pub fn rrt(agent_radius: f64, goal_radius: f64) -> Self {
        Self {
            iterations: RRT_ITERATIONS,
            step_size: 2.0 * agent_radius,
            goal_bias: 0.05,
            goal_tolerance: goal_radius,
            rewire_gamma: None,
        }
    }

    pub fn rrt_star(agent_radius: f64, goal_radius: f64) -> Self {
        Self {
            iterations: RRT_STAR_ITERATIONS,
            ..Self::rrt(agent_radius, goal_radius)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec2>,
    pub cost: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Vec2>) -> Self {
        let cost = polyline_length(&waypoints);
        Self { waypoints, cost }
    }

    /// `cost <v>` then one `x y` line per waypoint.
    pub fn to_text(&self) -> String {
        let mut out = format!("cost {}\n", self.cost);
        for w in &self.waypoints {
            let _ = writeln!(out, "{} {}", w.x, w.y);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Path, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or("empty path text")?;
        let cost = head
            .strip_prefix("cost ")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| format!("bad header {head:?}"))?;
        let mut waypoints = Vec::new();
        for (i, l) in lines.enumerate() {
            let mut it = l.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => waypoints.push(Vec2::new(x, y)),
                _ => return Err(format!("line {}: expected `x y`", i + 2)),
            }
        }
        if waypoints.is_empty() {
            return Err("path has no waypoints".into());
        }
        Ok(Path { waypoints, cost })
    }
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("no path found within {iterations} iterations")]
    NoPathFound { iterations: usize },
    #[error("{0} position collides with an inflated landmark")]
    InvalidEndpoint(&'static str),
}

/// Segment and point validity against landmarks grown by the agent radius.
#[derive(Debug, Clone)]
pub struct ClearanceChecker {
    inflated: Vec<Circle>,
    hash: SpatialHash,
    scratch: Vec<u32>,
}

impl ClearanceChecker {
    pub fn new(landmarks: &[Circle], agent_radius: f64) -> Self {
        let inflated: Vec<Circle> = landmarks.iter().map(|l| l.inflated(agent_radius)).collect();
        let max_r = inflated.iter().map(|c| c.radius).fold(0.0, f64::max);
        let cell = if max_r > 0.0 { 2.0 * max_r } else { 1.0 };
        Self {
            hash: SpatialHash::build(cell, &inflated),
            inflated,
            scratch: Vec::new(),
        }
    }

    pub fn inflated(&self) -> &[Circle] {
        &self.inflated
    }

    /// Minimum clearance of the segment over all inflated landmarks near it
    /// (`f64::INFINITY` when none is near).
    pub fn segment_clearance(&mut self, p0: Vec2, p1: Vec2) -> f64 {
        let mid = (p0 + p1) * 0.5;
        let probe = Circle::new(mid, (p1 - p0).norm() * 0.5);
        self.hash.query_into(&probe, 0.0, &mut self.scratch);
        self.scratch
            .iter()
            .map(|&j| segment_circle_clearance(p0, p1, &self.inflated[j as usize]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn segment_free(&mut self, p0: Vec2, p1: Vec2) -> bool {
        self.segment_clearance(p0, p1) > 0.0
    }

    pub fn point_free(&mut self, p: Vec2) -> bool {
        self.segment_free(p, p)
    }
}

/// Exact minimum clearance of a whole path against all inflated landmarks.
pub fn path_clearance(path: &Path, landmarks: &[Circle], agent_radius: f64) -> f64 {
    let segs: Vec<(Vec2, Vec2)> = if path.waypoints.len() == 1 {
        vec![(path.waypoints[0], path.waypoints[0])]
    } else {
        path.waypoints.windows(2).map(|w| (w[0], w[1])).collect()
    };
    segs.iter()
        .flat_map(|&(a, b)| {
            landmarks
                .iter()
                .map(move |l| segment_circle_clearance(a, b, &l.inflated(agent_radius)))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Uniform bucket grid for nearest / radius queries over tree nodes.
struct NodeIndex {
    origin: Vec2,
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<u32>>,
}

impl NodeIndex {
    fn new(bounds: Bounds, cell: f64) -> Self {
        let nx = ((bounds.width() / cell).ceil() as i64).clamp(1, 4096);
        let ny = ((bounds.height() / cell).ceil() as i64).clamp(1, 4096);
        let cell = (bounds.width() / nx as f64).max(bounds.height() / ny as f64).max(cell);
        Self {
            origin: bounds.min,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); (nx * ny) as usize],
        }
    }

    fn coords(&self, p: Vec2) -> (i64, i64) {
        let cx = ((p.x - self.origin.x) / self.cell).floor() as i64;
        let cy = ((p.y - self.origin.y) / self.cell).floor() as i64;
        (cx.clamp(0, self.nx - 1), cy.clamp(0, self.ny - 1))
    }

    fn insert(&mut self, id: u32, p: Vec2) {
        let (cx, cy) = self.coords(p);
        self.buckets[(cy * self.nx + cx) as usize].push(id);
    }

    /// Nearest node; ties go to the lower id.
    fn nearest(&self, p: Vec2, nodes: &[Node]) -> u32 {
        let (cx, cy) = self.coords(p);
        let mut best = (f64::INFINITY, u32::MAX);
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // every point in ring `ring + 1` or beyond is at least this far
            if best.1 != u32::MAX && best.0 <= ring as f64 * self.cell - self.cell {
                break;
            }
            for y in (cy - ring)..=(cy + ring) {
                for x in (cx - ring)..=(cx + ring) {
                    if (y - cy).abs() != ring && (x - cx).abs() != ring {
                        continue;
                    }
                    if x < 0 || y < 0 || x >= self.nx || y >= self.ny {
                        continue;
                    }
                    for &id in &self.buckets[(y * self.nx + x) as usize] {
                        let d = (nodes[id as usize].pos - p).norm();
                        if d < best.0 || (d == best.0 && id < best.1) {
                            best = (d, id);
                        }
                    }
                }
            }
        }
        best.1
    }

    /// Ids of nodes within `radius` of `p`, ascending.
    fn near(&self, p: Vec2, radius: f64, nodes: &[Node], out: &mut Vec<u32>) {
        out.clear();
        let (x0, y0) = self.coords(p - Vec2::new(radius, radius));
        let (x1, y1) = self.coords(p + Vec2::new(radius, radius));
        for y in y0..=y1 {
            for x in x0..=x1 {
                for &id in &self.buckets[(y * self.nx + x) as usize] {
                    if (nodes[id as usize].pos - p).norm() <= radius {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

#[derive(Debug, Clone)]
struct Node {
    pos: Vec2,
    parent: u32,
    cost: f64,
}

const ROOT: u32 = u32::MAX;

fn sample_point(s: &mut RngStream, bounds: &Bounds, goal: Vec2, goal_bias: f64) -> Vec2 {
    if s.bernoulli(goal_bias) {
        goal
    } else {
        Vec2::new(
            s.uniform(bounds.min.x, bounds.max.x),
            s.uniform(bounds.min.y, bounds.max.y),
        )
    }
}

fn steer(from: Vec2, to: Vec2, step: f64) -> Vec2 {
    let d = (to - from).norm();
    if d <= step {
        to
    } else {
        from + (to - from) * (step / d)
    }
}

fn sampling_bounds(map: &MapSpec, start: Vec2, goal: Vec2) -> Bounds {
    let b = map.bounds;
    Bounds::new(
        Vec2::new(b.min.x.min(start.x).min(goal.x), b.min.y.min(start.y).min(goal.y)),
        Vec2::new(b.max.x.max(start.x).max(goal.x), b.max.y.max(start.y).max(goal.y)),
    )
}

fn trace_back(nodes: &[Node], mut id: u32, goal: Vec2) -> Path {
    let mut pts = Vec::new();
    while id != ROOT {
        pts.push(nodes[id as usize].pos);
        id = nodes[id as usize].parent;
    }
    pts.reverse();
    if *pts.last().expect("non-empty") != goal {
        pts.push(goal);
    }
    Path::new(pts)
}

fn check_endpoints(checker: &mut ClearanceChecker, start: Vec2, goal: Vec2) -> Result<(), PlanError> {
    if !checker.point_free(start) {
        return Err(PlanError::InvalidEndpoint("start"));
    }
    if !checker.point_free(goal) {
        return Err(PlanError::InvalidEndpoint("goal"));
    }
    Ok(())
}

/// Rapidly-exploring random tree. Returns the first path whose last tree
/// node is within `goal_tolerance` of `goal` with a free straight segment to
/// it; the goal itself is appended as the final waypoint.
pub fn rrt_plan(
    map: &MapSpec,
    start: Vec2,
    goal: Vec2,
    agent_radius: f64,
    p: &PlannerParams,
    rng: RngKey,
) -> Result<Path, PlanError> {
    let mut checker = ClearanceChecker::new(&map.landmarks, agent_radius);
    check_endpoints(&mut checker, start, goal)?;
    if start == goal {
        return Ok(Path::new(vec![start]));
    }
    let bounds = sampling_bounds(map, start, goal);
    let mut index = NodeIndex::new(bounds, p.step_size.max(1e-9));
    let mut nodes = vec![Node {
        pos: start,
        parent: ROOT,
        cost: 0.0,
    }];
    index.insert(0, start);
    if (start - goal).norm() <= p.goal_tolerance && checker.segment_free(start, goal) {
        return Ok(trace_back(&nodes, 0, goal));
    }
    let mut s = rng.stream();
    for _ in 0..p.iterations {
        let target = sample_point(&mut s, &bounds, goal, p.goal_bias);
        let near = index.nearest(target, &nodes);
        let from = nodes[near as usize].pos;
        let new = steer(from, target, p.step_size);
        if new == from || !checker.segment_free(from, new) {
            continue;
        }
        let id = nodes.len() as u32;
        nodes.push(Node {
            pos: new,
            parent: near,
            cost: nodes[near as usize].cost + (new - from).norm(),
        });
        index.insert(id, new);
        if (new - goal).norm() <= p.goal_tolerance && checker.segment_free(new, goal) {
            return Ok(trace_back(&nodes, id, goal));
        }
    }
    Err(PlanError::NoPathFound {
        iterations: p.iterations,
    })
}

/// RRT* tree state, exposed so the budget can be spent in chunks.
pub struct RrtStar {
    checker: ClearanceChecker,
    index: NodeIndex,
    nodes: Vec<Node>,
    children: Vec<Vec<u32>>,
    goal_links: Vec<u32>,
    bounds: Bounds,
    start: Vec2,
    goal: Vec2,
    params: PlannerParams,
    gamma: f64,
    stream: RngStream,
    iterations_done: usize,
    near: Vec<u32>,
}

impl RrtStar {
    pub fn new(
        map: &MapSpec,
        start: Vec2,
        goal: Vec2,
        agent_radius: f64,
        p: &PlannerParams,
        rng: RngKey,
    ) -> Result<Self, PlanError> {
        let mut checker = ClearanceChecker::new(&map.landmarks, agent_radius);
        check_endpoints(&mut checker, start, goal)?;
        let bounds = sampling_bounds(map, start, goal);
        let mut index = NodeIndex::new(bounds, p.step_size.max(1e-9));
        index.insert(0, start);
        let mut tree = Self {
            checker,
            index,
            nodes: vec![Node {
                pos: start,
                parent: ROOT,
                cost: 0.0,
            }],
            children: vec![Vec::new()],
            goal_links: Vec::new(),
            gamma: p.rewire_gamma.unwrap_or(1.5 * bounds.diagonal()),
            bounds,
            start,
            goal,
            params: *p,
            stream: rng.stream(),
            iterations_done: 0,
            near: Vec::new(),
        };
        if start != goal && (start - goal).norm() <= p.goal_tolerance && tree.checker.segment_free(start, goal) {
            tree.goal_links.push(0);
        }
        Ok(tree)
    }

    pub fn iterations_done(&self) -> usize {
        self.iterations_done
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn rewire_radius(&self) -> f64 {
        let n = (self.nodes.len() + 1) as f64;
        (4.0 * self.params.step_size).min(self.gamma * (n.ln() / n).sqrt())
    }

    /// Re-derives the costs of `root`'s subtree from its (new) cost.
    fn propagate(&mut self, root: u32) {
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let base = self.nodes[id as usize].cost;
            let pos = self.nodes[id as usize].pos;
            for &c in &self.children[id as usize] {
                let node = &mut self.nodes[c as usize];
                node.cost = base + (node.pos - pos).norm();
                stack.push(c);
            }
        }
    }

    /// Runs `n` more sampling iterations.
    pub fn extend(&mut self, n: usize) {
        if self.start == self.goal {
            self.iterations_done += n;
            return;
        }
        for _ in 0..n {
            self.iterations_done += 1;
            let target = sample_point(&mut self.stream, &self.bounds, self.goal, self.params.goal_bias);
            let nearest = self.index.nearest(target, &self.nodes);
            let from = self.nodes[nearest as usize].pos;
            let new = steer(from, target, self.params.step_size);
            if new == from || !self.checker.segment_free(from, new) {
                continue;
            }
            let radius = self.rewire_radius();
            let mut near = std::mem::take(&mut self.near);
            self.index.near(new, radius, &self.nodes, &mut near);

            let mut parent = nearest;
            let mut best = self.nodes[nearest as usize].cost + (new - from).norm();
            for &j in &near {
                if j == nearest {
                    continue;
                }
                let q = self.nodes[j as usize].pos;
                let c = self.nodes[j as usize].cost + (new - q).norm();
                if c < best && self.checker.segment_free(q, new) {
                    best = c;
                    parent = j;
                }
            }
            let id = self.nodes.len() as u32;
            self.nodes.push(Node {
                pos: new,
                parent,
                cost: best,
            });
            self.children.push(Vec::new());
            self.children[parent as usize].push(id);
            self.index.insert(id, new);

            for &j in &near {
                if j == parent {
                    continue;
                }
                let q = self.nodes[j as usize].pos;
                let c = best + (q - new).norm();
                if c < self.nodes[j as usize].cost && self.checker.segment_free(new, q) {
                    let old = self.nodes[j as usize].parent;
                    if old != ROOT {
                        self.children[old as usize].retain(|&k| k != j);
                    }
                    self.nodes[j as usize].parent = id;
                    self.nodes[j as usize].cost = c;
                    self.children[id as usize].push(j);
                    self.propagate(j);
                }
            }
            self.near = near;

            if (new - self.goal).norm() <= self.params.goal_tolerance && self.checker.segment_free(new, self.goal) {
                self.goal_links.push(id);
            }
        }
    }

    /// Cheapest goal-reaching path found so far.
    pub fn best_path(&self) -> Option<Path> {
        if self.start == self.goal {
            return Some(Path::new(vec![self.start]));
        }
        let mut best: Option<(f64, u32)> = None;
        for &id in &self.goal_links {
            let n = &self.nodes[id as usize];
            let total = n.cost + (self.goal - n.pos).norm();
            if best.is_none_or(|(c, b)| total < c || (total == c && id < b)) {
                best = Some((total, id));
            }
        }
        best.map(|(_, id)| trace_back(&self.nodes, id, self.goal))
    }
}

/// RRT* with choose-parent and rewiring within
/// `min(4·step, γ·sqrt(ln n / n))`. Runs the whole budget and returns the
/// cheapest goal-reaching path.
pub fn rrt_star_plan(
    map: &MapSpec,
    start: Vec2,
    goal: Vec2,
    agent_radius: f64,
    p: &PlannerParams,
    rng: RngKey,
) -> Result<Path, PlanError> {
    let mut tree = RrtStar::new(map, start, goal, agent_radius, p, rng)?;
    tree.extend(p.iterations);
    tree.best_path().ok_or(PlanError::NoPathFound {
        iterations: p.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdParams {
    pub kp: f64,
    pub kd: f64,
    pub waypoint_tolerance: f64,
}

/// Default gains. With the default velocity damping, `kp = 2, kd = 0.5`
/// leaves agents too slow to finish most episodes within 160 steps.
pub const DEFAULT_KP: f64 = 20.0;
pub const DEFAULT_KD: f64 = 5.0;

impl PdParams {
    pub fn for_radius(agent_radius: f64) -> Self {
        Self {
            kp: DEFAULT_KP,
            kd: DEFAULT_KD,
            waypoint_tolerance: agent_radius,
        }
    }
}

/// PD tracking of `path` from waypoint `cursor`. Waypoints within tolerance
/// are skipped; once inside the tolerance of the final waypoint only the
/// damping term remains.
pub fn pd_follow(agent: &AgentKinematics, path: &Path, cursor: usize, p: &PdParams) -> (Vec2, usize) {
    let last = path.waypoints.len() - 1;
    let mut c = cursor.min(last);
    let pos = agent.position;
    while c < last && (path.waypoints[c] - pos).norm() <= p.waypoint_tolerance {
        c += 1;
    }
    let damping = agent.velocity * -p.kd;
    if c == last && (path.waypoints[last] - pos).norm() <= p.waypoint_tolerance {
        return (damping, c);
    }
    ((path.waypoints[c] - pos) * p.kp + damping, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceFeatures {
    /// Ego-relative waypoints, zero-padded.
    pub waypoints: Vec<Vec2>,
    /// Path cost over the map diagonal, clamped to `[0, 1]`.
    pub cost_to_go: f64,
}

impl GuidanceFeatures {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.waypoints.iter().flat_map(|w| [w.x, w.y]).collect();
        out.push(self.cost_to_go);
        out
    }
}

/// Point at arc length `s` along `points`.
pub fn point_at_arc_length(points: &[Vec2], s: f64) -> Vec2 {
    let mut acc = 0.0;
    for w in points.windows(2) {
        let len = (w[1] - w[0]).norm();
        if acc + len >= s && len > 0.0 {
            let t = ((s - acc) / len).clamp(0.0, 1.0);
            return w[0] + (w[1] - w[0]) * t;
        }
        acc += len;
    }
    *points.last().expect("non-empty polyline")
}

/// Down-samples a path to `k` points: the first waypoint after the start,
/// then `k − 1` points evenly spaced by arc length from there to the goal.
pub fn downsample_path(path: &Path, k: usize) -> Vec<Vec2> {
    assert!(k >= 1, "need at least one guidance waypoint");
    let pts = &path.waypoints;
    let goal = *pts.last().expect("non-empty path");
    if pts.len() == 1 {
        return vec![goal; k];
    }
    let total = polyline_length(pts);
    if k == 1 {
        return vec![goal];
    }
    let s1 = (pts[1] - pts[0]).norm();
    let mut out = vec![pts[1]];
    for j in 1..k {
        let s = s1 + (total - s1) * j as f64 / (k - 1) as f64;
        out.push(if j == k - 1 { goal } else { point_at_arc_length(pts, s) });
    }
    out
}

/// A guidance plan computed once per episode; features are re-expressed
/// relative to the agent's current position each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidancePlan {
    pub path: Option<Path>,
    pub samples: Vec<Vec2>,
    pub diagonal: f64,
    pub k: usize,
}

impl GuidancePlan {
    pub fn features_at(&self, position: Vec2) -> GuidanceFeatures {
        match &self.path {
            Some(path) => GuidanceFeatures {
                waypoints: self.samples.iter().map(|&w| w - position).collect(),
                cost_to_go: if self.diagonal > 0.0 {
                    (path.cost / self.diagonal).clamp(0.0, 1.0)
                } else {
                    0.0
                },
            },
            None => GuidanceFeatures {
                waypoints: vec![Vec2::ZERO; self.k],
                cost_to_go: 1.0,
            },
        }
    }
}

/// Plans once with RRT* and builds the guidance plan. Planning failures are
/// encoded as zero waypoints with `cost_to_go = 1`.
pub fn rrt_star_guidance_plan(
    map: &MapSpec,
    start: Vec2,
    goal: Vec2,
    agent_radius: f64,
    k: usize,
    p: &PlannerParams,
    rng: RngKey,
) -> GuidancePlan {
    let path = rrt_star_plan(map, start, goal, agent_radius, p, rng).ok();
    let samples = path.as_ref().map(|p| downsample_path(p, k)).unwrap_or_default();
    GuidancePlan {
        path,
        samples,
        diagonal: map.bounds.diagonal(),
        k,
    }
}

/// Guidance features relative to the start position.
pub fn rrt_star_guidance(
    map: &MapSpec,
    start: Vec2,
    goal: Vec2,
    agent_radius: f64,
    k: usize,
    p: &PlannerParams,
    rng: RngKey,
) -> GuidanceFeatures {
    rrt_star_guidance_plan(map, start, goal, agent_radius, k, p, rng).features_at(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsModel;

    fn open_map() -> MapSpec {
        MapSpec::empty(Bounds::new(Vec2::new(-1.0, -2.0), Vec2::new(6.0, 2.0)))
    }

    fn agent(pos: Vec2, vel: Vec2) -> AgentKinematics {
        AgentKinematics {
            position: pos,
            velocity: vel,
            heading: 0.0,
            radius: 0.1,
            model: DynamicsModel::Holonomic,
        }
    }

    #[test]
    fn start_equals_goal() {
        let m = open_map();
        let p = PlannerParams::rrt(0.1, 0.1);
        let path = rrt_plan(&m, Vec2::ZERO, Vec2::ZERO, 0.1, &p, RngKey::from_seed(1)).unwrap();
        assert_eq!(path.waypoints, vec![Vec2::ZERO]);
        assert_eq!(path.cost, 0.0);
        let path = rrt_star_plan(&m, Vec2::ZERO, Vec2::ZERO, 0.1, &p, RngKey::from_seed(1)).unwrap();
        assert_eq!(path.cost, 0.0);
    }

    #[test]
    fn enclosed_goal_fails() {
        let mut ring = Vec::new();
        for i in 0..24 {
            let a = i as f64 / 24.0 * std::f64::consts::TAU;
            ring.push(Circle::new(Vec2::new(3.0 + a.cos(), a.sin()), 0.2));
        }
        let m = MapSpec::from_landmarks("ring", Bounds::new(Vec2::new(-1.0, -2.0), Vec2::new(6.0, 2.0)), ring);
        let p = PlannerParams {
            iterations: 3000,
            ..PlannerParams::rrt(0.1, 0.1)
        };
        let r = rrt_plan(&m, Vec2::ZERO, Vec2::new(3.0, 0.0), 0.1, &p, RngKey::from_seed(2));
        assert_eq!(r, Err(PlanError::NoPathFound { iterations: 3000 }));
    }

    #[test]
    fn invalid_endpoint() {
        let m = MapSpec::from_landmarks(
            "one",
            Bounds::new(Vec2::ZERO, Vec2::new(4.0, 4.0)),
            vec![Circle::new(Vec2::new(1.0, 1.0), 0.5)],
        );
        let p = PlannerParams::rrt(0.1, 0.1);
        let r = rrt_plan(&m, Vec2::new(1.0, 1.2), Vec2::new(3.0, 3.0), 0.1, &p, RngKey::from_seed(0));
        assert_eq!(r, Err(PlanError::InvalidEndpoint("start")));
    }

    #[test]
    fn pd_examples() {
        let p = PdParams {
            kp: 2.0,
            kd: 0.5,
            waypoint_tolerance: 0.1,
        };
        let at_goal = Path::new(vec![Vec2::ZERO]);
        assert_eq!(pd_follow(&agent(Vec2::ZERO, Vec2::ZERO), &at_goal, 0, &p), (Vec2::ZERO, 0));
        let path = Path::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]);
        let (f, c) = pd_follow(&agent(Vec2::ZERO, Vec2::ZERO), &path, 0, &p);
        assert_eq!((f, c), (Vec2::new(2.0, 0.0), 1));
        let (f, _) = pd_follow(&agent(Vec2::ZERO, Vec2::new(1.0, 0.0)), &path, 1, &p);
        assert_eq!(f, Vec2::new(1.5, 0.0));
    }

    #[test]
    fn path_text_round_trip() {
        let path = Path::new(vec![Vec2::ZERO, Vec2::new(0.1, 0.7), Vec2::new(3.0, -1.0 / 3.0)]);
        assert_eq!(Path::from_text(&path.to_text()).unwrap(), path);
        assert!(Path::from_text("cost 1\n1 2 3\n").is_err());
    }

    #[test]
    fn guidance_trivial_cases() {
        let m = open_map();
        let p = PlannerParams::rrt_star(0.1, 0.1);
        let g = rrt_star_guidance(&m, Vec2::ZERO, Vec2::ZERO, 0.1, 4, &p, RngKey::from_seed(1));
        assert_eq!(g.waypoints, vec![Vec2::ZERO; 4]);
        assert_eq!(g.cost_to_go, 0.0);
        let plan = GuidancePlan {
            path: None,
            samples: vec![],
            diagonal: 1.0,
            k: 4,
        };
        let f = plan.features_at(Vec2::new(1.0, 1.0));
        assert_eq!(f.waypoints, vec![Vec2::ZERO; 4]);
        assert_eq!(f.cost_to_go, 1.0);
    }
}
