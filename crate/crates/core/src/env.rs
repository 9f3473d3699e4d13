//! 2D worlds made of circular obstacles with an exact signed-distance field.

use std::fmt::Write as _;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Point = Vector2<f64>;

/// Distance reported when a map has no obstacles to measure against.
pub const DISTANCE_SENTINEL: f64 = 1e9;

/// Side length of the square world used by generated maps, meters.
pub const WORLD_SIZE: f64 = 20.0;

const MAX_GENERATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("map generation exceeded {0} rejection-sampling attempts")]
    GenerationFailure(usize),
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("invalid map spec: {0}")]
    InvalidSpec(String),
    #[error("map parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Point,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: Point, radius: f64) -> Result<Self, EnvError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(EnvError::InvalidObstacle(format!("radius {radius} must be positive")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(EnvError::InvalidObstacle("center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    /// Surface distance and its gradient. At the exact center the gradient is
    /// undefined and reported as the zero vector.
    #[inline]
    pub fn distance(&self, p: &Point) -> (f64, Point) {
        let offset = p - self.center;
        let norm = offset.norm();
        let grad = if norm > 0.0 { offset / norm } else { Point::zeros() };
        (norm - self.radius, grad)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn square(size: f64) -> Self {
        Self::new(Point::zeros(), Point::new(size, size))
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: &Point) -> Point {
        Point::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::square(WORLD_SIZE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    obstacles: Vec<Obstacle>,
    bounds: Bounds,
    adversary_index: Option<usize>,
}

impl EnvironmentMap {
    pub fn new(bounds: Bounds, obstacles: Vec<Obstacle>) -> Result<Self, EnvError> {
        if let Some(o) = obstacles.iter().find(|o| !bounds.contains(&o.center)) {
            return Err(EnvError::InvalidObstacle(format!(
                "center ({}, {}) outside bounds",
                o.center.x, o.center.y
            )));
        }
        Ok(Self { obstacles, bounds, adversary_index: None })
    }

    pub fn empty(bounds: Bounds) -> Self {
        Self { obstacles: Vec::new(), bounds, adversary_index: None }
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn adversary_index(&self) -> Option<usize> {
        self.adversary_index
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Returns a copy with one more obstacle appended. The center is clamped into
    /// the bounds so the map invariant holds for agents pushed against a wall.
    pub fn with_obstacle(&self, obstacle: Obstacle) -> Self {
        let mut out = self.clone();
        out.obstacles.push(Obstacle { center: self.bounds.clamp(&obstacle.center), ..obstacle });
        out
    }

    /// Returns a copy with the adversary appended as the last obstacle.
    pub fn with_adversary(&self, center: Point, radius: f64) -> Self {
        let mut out = self.with_obstacle(Obstacle { center, radius });
        out.adversary_index = Some(out.obstacles.len() - 1);
        out
    }

    /// Exact signed distance to the nearest obstacle surface and its gradient.
    ///
    /// Equidistant obstacles resolve to the lowest index. With no obstacles the
    /// result is `(DISTANCE_SENTINEL, 0)`.
    pub fn signed_distance(&self, p: &Point) -> (f64, Point) {
        let mut best = (DISTANCE_SENTINEL, Point::zeros());
        let mut found = false;
        for o in &self.obstacles {
            let (d, g) = o.distance(p);
            if !found || d < best.0 {
                best = (d, g);
                found = true;
            }
        }
        best
    }

    /// Smallest surface distance to any obstacle other than `exclude`.
    pub fn min_separation(&self, p: &Point, exclude: Option<usize>) -> f64 {
        self.obstacles
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(_, o)| o.distance(p).0)
            .reduce(f64::min)
            .unwrap_or(DISTANCE_SENTINEL)
    }

    /// Smallest surface distance from the segment `a`-`b` to any obstacle.
    pub fn segment_clearance(&self, a: &Point, b: &Point) -> f64 {
        let ab = b - a;
        let len2 = ab.norm_squared();
        self.obstacles
            .iter()
            .map(|o| {
                let t = if len2 > 0.0 { ((o.center - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (a + ab * t - o.center).norm() - o.radius
            })
            .reduce(f64::min)
            .unwrap_or(DISTANCE_SENTINEL)
    }

    /// Flat text form: a `bounds xmin ymin xmax ymax` header, then `cx cy r` per obstacle.
    pub fn to_text(&self) -> String {
        let b = &self.bounds;
        let mut s = format!("bounds {} {} {} {}\n", b.min.x, b.min.y, b.max.x, b.max.y);
        for o in &self.obstacles {
            let _ = writeln!(s, "{} {} {}", o.center.x, o.center.y, o.radius);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, EnvError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(EnvError::Parse { line: 1, msg: "missing header".into() })?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("bounds") {
            return Err(EnvError::Parse { line: 1, msg: "expected `bounds` header".into() });
        }
        let nums = parse_floats(fields, 4, 1)?;
        let bounds = Bounds::new(Point::new(nums[0], nums[1]), Point::new(nums[2], nums[3]));
        let mut obstacles = Vec::new();
        for (i, line) in lines {
            let v = parse_floats(line.split_whitespace(), 3, i + 1)?;
            obstacles.push(Obstacle::new(Point::new(v[0], v[1]), v[2])?);
        }
        Self::new(bounds, obstacles)
    }
}

fn parse_floats<'a>(
    fields: impl Iterator<Item = &'a str>,
    expected: usize,
    line: usize,
) -> Result<Vec<f64>, EnvError> {
    let v = fields
        .map(|f| f.parse::<f64>().map_err(|e| EnvError::Parse { line, msg: format!("`{f}`: {e}") }))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != expected {
        return Err(EnvError::Parse { line, msg: format!("expected {expected} numbers, got {}", v.len()) });
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Sparse,
    Dense,
}

impl MapKind {
    pub fn default_count(self) -> usize {
        match self {
            MapKind::Sparse => 4,
            MapKind::Dense => 16,
        }
    }

    pub fn default_radius_range(self) -> (f64, f64) {
        match self {
            MapKind::Sparse => (0.5, 0.8),
            MapKind::Dense => (0.4, 0.7),
        }
    }
}

impl std::str::FromStr for MapKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(MapKind::Sparse),
            "dense" => Ok(MapKind::Dense),
            other => Err(format!("unknown map kind `{other}`")),
        }
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MapKind::Sparse => "sparse",
            MapKind::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSpec {
    pub kind: MapKind,
    pub obstacle_count: usize,
    pub radius_range: (f64, f64),
    pub seed: u64,
}

impl MapSpec {
    pub fn new(kind: MapKind, obstacle_count: usize, radius_range: (f64, f64), seed: u64) -> Self {
        Self { kind, obstacle_count, radius_range, seed }
    }

    /// Spec with the kind's default obstacle count and radius range.
    pub fn of_kind(kind: MapKind, seed: u64) -> Self {
        Self::new(kind, kind.default_count(), kind.default_radius_range(), seed)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let (lo, hi) = self.radius_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(EnvError::InvalidSpec(format!("radius range ({lo}, {hi}) needs 0 < min <= max")));
        }
        Ok(())
    }
}

/// A generated map together with the target's start and goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: EnvironmentMap,
    pub start: Point,
    pub goal: Point,
}

/// Start on the left edge and goal on the right edge, heights drawn from the seed.
fn corridor_endpoints(rng: &mut ChaCha8Rng, bounds: &Bounds) -> (Point, Point) {
    let inset = 1.0;
    let lo = bounds.min.y + 0.15 * bounds.height();
    let hi = bounds.max.y - 0.15 * bounds.height();
    let start = Point::new(bounds.min.x + inset, rng.gen_range(lo..=hi));
    let goal = Point::new(bounds.max.x - inset, rng.gen_range(lo..=hi));
    (start, goal)
}

/// Deterministic scenario generation from a [`MapSpec`].
///
/// Obstacles are rejection-sampled: each keeps a surface clearance of at least
/// twice the maximum radius from the start and goal, and obstacles do not overlap.
pub fn generate_scenario(spec: &MapSpec) -> Result<Scenario, EnvError> {
    spec.validate()?;
    let bounds = Bounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (start, goal) = corridor_endpoints(&mut rng, &bounds);
    let (r_lo, r_hi) = spec.radius_range;
    let clearance = 2.0 * r_hi;

    let mut obstacles: Vec<Obstacle> = Vec::with_capacity(spec.obstacle_count);
    let mut attempts = 0;
    while obstacles.len() < spec.obstacle_count {
        attempts += 1;
        if attempts > MAX_GENERATION_ATTEMPTS {
            return Err(EnvError::GenerationFailure(MAX_GENERATION_ATTEMPTS));
        }
        let radius = if r_hi > r_lo { rng.gen_range(r_lo..r_hi) } else { r_lo };
        let center = Point::new(
            rng.gen_range(bounds.min.x..bounds.max.x),
            rng.gen_range(bounds.min.y..bounds.max.y),
        );
        let candidate = Obstacle { center, radius };
        let clear_of_endpoints = [start, goal].iter().all(|p| candidate.distance(p).0 >= clearance);
        let clear_of_others = obstacles
            .iter()
            .all(|o| (o.center - center).norm() >= o.radius + radius);
        if clear_of_endpoints && clear_of_others {
            obstacles.push(candidate);
        }
    }
    Ok(Scenario { map: EnvironmentMap { obstacles, bounds, adversary_index: None }, start, goal })
}

pub fn generate_map(spec: &MapSpec) -> Result<EnvironmentMap, EnvError> {
    generate_scenario(spec).map(|s| s.map)
}
