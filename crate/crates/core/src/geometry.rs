//! Circle primitives, distance queries, grid discretization and the
//! spatial-hash broad phase shared by physics, sensing and planning.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// A 2D vector in world units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    pub const X: Vec2 = Vec2 { x: 1.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rescales `self` so its norm does not exceed `max_norm`, preserving
    /// direction. The result satisfies `norm() <= max_norm` in floating point.
    pub fn clamp_norm(self, max_norm: f64) -> Vec2 {
        let n = self.norm();
        if n <= max_norm {
            return self;
        }
        let mut v = self * (max_norm / n);
        // one or two ulps of shrink absorb the rounding of the rescale
        while v.norm() > max_norm {
            v = v * (1.0 - f64::EPSILON);
        }
        v
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A disc: the only physical shape in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    #[inline]
    pub const fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Checked constructor for values arriving from outside the crate.
    pub fn try_new(center: Vec2, radius: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() || !radius.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if radius <= 0.0 {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn inflated(self, by: f64) -> Circle {
        Circle::new(self.center, self.radius + by)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("circle radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn contains_circle(&self, c: &Circle) -> bool {
        c.center.x - c.radius >= self.min.x
            && c.center.x + c.radius <= self.max.x
            && c.center.y - c.radius >= self.min.y
            && c.center.y + c.radius <= self.max.y
    }
}

/// Distance between the surfaces of two discs; negative iff they overlap.
#[inline]
pub fn surface_distance(a: &Circle, b: &Circle) -> f64 {
    (a.center - b.center).norm() - a.radius - b.radius
}

/// Closest point of segment `[p0, p1]` to `q`.
#[inline]
pub fn closest_point_on_segment(p0: Vec2, p1: Vec2, q: Vec2) -> Vec2 {
    let d = p1 - p0;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return p0;
    }
    let t = ((q - p0).dot(d) / len2).clamp(0.0, 1.0);
    p0 + d * t
}

/// Minimum distance from any point of segment `[p0, p1]` to the surface of
/// `c`; negative when the segment enters the disc.
#[inline]
pub fn segment_circle_clearance(p0: Vec2, p1: Vec2, c: &Circle) -> f64 {
    closest_point_on_segment(p0, p1, c.center).distance(c.center) - c.radius
}

/// Row-major occupancy grid, `true` = obstacle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoolGrid {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl BoolGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, false)
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            cells: vec![value; height * width],
        }
    }

    /// Builds a grid from row-major cells. Returns `None` on a length mismatch.
    pub fn from_cells(height: usize, width: usize, cells: Vec<bool>) -> Option<Self> {
        (cells.len() == height * width).then_some(Self {
            height,
            width,
            cells,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.width + col] = value;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Cell-wise negation.
    pub fn inverted(&self) -> BoolGrid {
        BoolGrid {
            height: self.height,
            width: self.width,
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }

    /// `(row, col)` of every set cell in row-major order.
    pub fn set_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c))
            .collect()
    }

    /// 4-connected components of the set cells, labelled in row-major
    /// discovery order. Returns per-cell labels (`None` for unset cells) and
    /// the size of each component.
    pub fn components(&self) -> (Vec<Option<usize>>, Vec<usize>) {
        let mut labels = vec![None; self.cells.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if !self.cells[start] || labels[start].is_some() {
                continue;
            }
            let id = sizes.len();
            let mut size = 0;
            labels[start] = Some(id);
            stack.push(start);
            while let Some(i) = stack.pop() {
                size += 1;
                let (r, c) = (i / self.width, i % self.width);
                let mut visit = |j: usize| {
                    if self.cells[j] && labels[j].is_none() {
                        labels[j] = Some(id);
                        stack.push(j);
                    }
                };
                if r > 0 {
                    visit(i - self.width);
                }
                if r + 1 < self.height {
                    visit(i + self.width);
                }
                if c > 0 {
                    visit(i - 1);
                }
                if c + 1 < self.width {
                    visit(i + 1);
                }
            }
            sizes.push(size);
        }
        (labels, sizes)
    }
}

/// Tiles every obstacle cell with `granularity²` inscribed circles.
///
/// Cell `(row, col)` spans `[col·s, (col+1)·s] × [row·s, (row+1)·s]`. Each
/// sub-cell of side `s / granularity` gets one circle inscribed in it, so the
/// circles' bounding boxes tile the cell exactly while the sub-cell corners
/// stay uncovered. Output is row-major by cell, then row-major by sub-circle.
pub fn grid_to_circles(grid: &BoolGrid, cell_size: f64, granularity: usize) -> Vec<Circle> {
    assert!(granularity >= 1, "granularity must be at least 1");
    let sub = cell_size / granularity as f64;
    let radius = sub / 2.0;
    let mut out = Vec::with_capacity(grid.count() * granularity * granularity);
    for (row, col) in grid.set_cells() {
        let x0 = col as f64 * cell_size;
        let y0 = row as f64 * cell_size;
        for sr in 0..granularity {
            for sc in 0..granularity {
                let center = Vec2::new(
                    x0 + (sc as f64 + 0.5) * sub,
                    y0 + (sr as f64 + 0.5) * sub,
                );
                out.push(Circle::new(center, radius));
            }
        }
    }
    out
}

type CellKey = (i32, i32);

/// Uniform-grid hash from cell coordinate to the indices of the bodies whose
/// bounding boxes touch that cell.
///
/// Bodies must be inserted in ascending index order so every bucket stays
/// sorted; [`SpatialHash::rebuild`] does that for a whole slice.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell_size: f64,
    inv_cell: f64,
    buckets: FxHashMap<CellKey, Vec<u32>>,
    len: usize,
}

impl SpatialHash {
    pub fn new(cell_size: f64) -> Self {
        assert!(
            cell_size.is_finite() && cell_size > 0.0,
            "spatial hash cell size must be positive"
        );
        Self {
            cell_size,
            inv_cell: 1.0 / cell_size,
            buckets: FxHashMap::default(),
            len: 0,
        }
    }

    pub fn build(cell_size: f64, circles: &[Circle]) -> Self {
        let mut hash = Self::new(cell_size);
        hash.rebuild(circles);
        hash
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Empties every bucket while keeping allocations for reuse.
    pub fn clear(&mut self) {
        for bucket in self.buckets.values_mut() {
            bucket.clear();
        }
        self.len = 0;
    }

    /// Clears the hash and inserts `circles[i]` under index `i`.
    pub fn rebuild(&mut self, circles: &[Circle]) {
        self.clear();
        for (i, c) in circles.iter().enumerate() {
            self.insert(i, c);
        }
    }

    #[inline]
    fn cell_of(&self, v: f64) -> i32 {
        // saturating float->int cast keeps far-away bodies in edge cells
        (v * self.inv_cell).floor() as i32
    }

    fn cell_range(&self, c: &Circle, pad: f64) -> (CellKey, CellKey) {
        let r = c.radius + pad;
        (
            (self.cell_of(c.center.x - r), self.cell_of(c.center.y - r)),
            (self.cell_of(c.center.x + r), self.cell_of(c.center.y + r)),
        )
    }

    pub fn insert(&mut self, index: usize, c: &Circle) {
        let idx = u32::try_from(index).expect("body index exceeds u32");
        let ((x0, y0), (x1, y1)) = self.cell_range(c, 0.0);
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                let bucket = self.buckets.entry((cx, cy)).or_default();
                match bucket.last() {
                    Some(&last) if last >= idx => {
                        if let Err(pos) = bucket.binary_search(&idx) {
                            bucket.insert(pos, idx);
                        }
                    }
                    _ => bucket.push(idx),
                }
            }
        }
        self.len += 1;
    }

    /// Appends to `out` (after clearing it) every body whose bounding box
    /// touches the box of `c` grown by `range`, sorted ascending and
    /// deduplicated. This is a superset of the bodies with
    /// `surface_distance < range`.
    pub fn query_into(&self, c: &Circle, range: f64, out: &mut Vec<u32>) {
        out.clear();
        if self.len == 0 {
            return;
        }
        let ((x0, y0), (x1, y1)) = self.cell_range(c, range.max(0.0));
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(bucket) = self.buckets.get(&(cx, cy)) {
                    out.extend_from_slice(bucket);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    pub fn query_neighbors(&self, c: &Circle, range: f64) -> Vec<usize> {
        let mut raw = Vec::new();
        self.query_into(c, range, &mut raw);
        raw.into_iter().map(|i| i as usize).collect()
    }
}

/// Broad phase over one scene: a per-substep hash of the agents plus a static
/// hash of the landmarks. Global body indices put agents first
/// (`0..num_agents`) and landmarks after them.
#[derive(Debug, Clone)]
pub struct BroadPhase {
    agents: SpatialHash,
    landmarks: SpatialHash,
    num_agents: usize,
    scratch: Vec<u32>,
}

impl BroadPhase {
    pub fn new(cell_size: f64, landmarks: &[Circle]) -> Self {
        Self {
            agents: SpatialHash::new(cell_size),
            landmarks: SpatialHash::build(cell_size, landmarks),
            num_agents: 0,
            scratch: Vec::new(),
        }
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    /// Re-indexes the agent bodies; landmarks are untouched.
    pub fn update_agents(&mut self, agents: impl ExactSizeIterator<Item = Circle>) {
        self.num_agents = agents.len();
        self.agents.clear();
        for (i, c) in agents.enumerate() {
            self.agents.insert(i, &c);
        }
    }

    /// Global indices of the candidate bodies near `c`, ascending.
    pub fn query_into(&mut self, c: &Circle, range: f64, out: &mut Vec<usize>) {
        out.clear();
        self.agents.query_into(c, range, &mut self.scratch);
        out.extend(self.scratch.iter().map(|&i| i as usize));
        self.landmarks.query_into(c, range, &mut self.scratch);
        let offset = self.num_agents;
        out.extend(self.scratch.iter().map(|&i| i as usize + offset));
    }

    pub fn query(&mut self, c: &Circle, range: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_into(c, range, &mut out);
        out
    }
}
