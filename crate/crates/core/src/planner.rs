//! Waypoint trajectories and the composite smoothness + collision objective.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::env::{EnvironmentMap, Point};

/// Step used for finite-difference Hessians of the analytic gradient.
pub const HESSIAN_STEP: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("trajectory needs at least one interior waypoint")]
    NoWaypoints,
    #[error("decision vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("trajectory parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Fixed endpoints plus `K` free interior waypoints spaced `dt` seconds apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Point,
    pub goal: Point,
    pub waypoints: Vec<Point>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(start: Point, goal: Point, waypoints: Vec<Point>, dt: f64) -> Result<Self, PlannerError> {
        if waypoints.is_empty() {
            return Err(PlannerError::NoWaypoints);
        }
        Ok(Self { start, goal, waypoints, dt })
    }

    /// `k` waypoints evenly spaced on the start-goal segment.
    pub fn straight_line(start: Point, goal: Point, k: usize) -> Result<Self, PlannerError> {
        let waypoints = (1..=k)
            .map(|i| start + (goal - start) * (i as f64 / (k + 1) as f64))
            .collect();
        Self::new(start, goal, waypoints, 1.0)
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Dimension of the decision vector, `2K`.
    pub fn dim(&self) -> usize {
        2 * self.waypoints.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.waypoints.iter().flat_map(|p| [p.x, p.y]))
    }

    /// Same endpoints with interior waypoints taken from `x`.
    pub fn with_vector(&self, x: &DVector<f64>) -> Result<Self, PlannerError> {
        if x.len() != self.dim() {
            return Err(PlannerError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(Self { waypoints: unflatten(x), ..self.clone() })
    }

    /// Start, waypoints, goal.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        std::iter::once(self.start).chain(self.waypoints.iter().copied()).chain(std::iter::once(self.goal))
    }

    pub fn path_length(&self) -> f64 {
        let pts: Vec<Point> = self.points().collect();
        pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Point reached after travelling `distance` meters along the polyline.
    pub fn point_at_arc_length(&self, distance: f64) -> Point {
        let pts: Vec<Point> = self.points().collect();
        let mut remaining = distance.max(0.0);
        for w in pts.windows(2) {
            let seg = (w[1] - w[0]).norm();
            if remaining <= seg && seg > 0.0 {
                return w[0] + (w[1] - w[0]) * (remaining / seg);
            }
            remaining -= seg;
        }
        self.goal
    }

    /// The part of this path beyond `distance` meters of arc length, re-parameterized
    /// with `k` waypoints evenly spaced in arc length. Used to warm-start replans.
    pub fn tail(&self, distance: f64, k: usize) -> Result<Self, PlannerError> {
        let pts: Vec<Point> = self.points().collect();
        let from = self.point_at_arc_length(distance);
        let mut travelled = 0.0;
        let mut rest = vec![from];
        for w in pts.windows(2) {
            travelled += (w[1] - w[0]).norm();
            if travelled > distance {
                rest.push(w[1]);
            }
        }
        if rest.len() == 1 {
            rest.push(self.goal);
        }
        let total: f64 = rest.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let mut waypoints = Vec::with_capacity(k);
        let (mut seg, mut seg_start) = (0, 0.0);
        for i in 1..=k {
            let target = total * i as f64 / (k + 1) as f64;
            while seg + 2 < rest.len() && seg_start + (rest[seg + 1] - rest[seg]).norm() < target {
                seg_start += (rest[seg + 1] - rest[seg]).norm();
                seg += 1;
            }
            let len = (rest[seg + 1] - rest[seg]).norm();
            let frac = if len > 0.0 { ((target - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
            waypoints.push(rest[seg] + (rest[seg + 1] - rest[seg]) * frac);
        }
        Trajectory::new(from, self.goal, waypoints, self.dt)
    }

    /// Header `start sx sy goal gx gy dt v`, then `x y` per waypoint.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "start {} {} goal {} {} dt {}\n",
            self.start.x, self.start.y, self.goal.x, self.goal.y, self.dt
        );
        for p in &self.waypoints {
            let _ = writeln!(s, "{} {}", p.x, p.y);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, PlannerError> {
        let err = |line: usize, msg: &str| PlannerError::Parse { line, msg: msg.to_string() };
        let num = |line: usize, tok: Option<&str>| -> Result<f64, PlannerError> {
            tok.ok_or_else(|| err(line, "missing number"))?
                .parse::<f64>()
                .map_err(|e| err(line, &e.to_string()))
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let mut t = header.split_whitespace();
        let expect = |kw: &str, t: &mut std::str::SplitWhitespace| {
            if t.next() == Some(kw) { Ok(()) } else { Err(err(1, &format!("expected `{kw}`"))) }
        };
        expect("start", &mut t)?;
        let start = Point::new(num(1, t.next())?, num(1, t.next())?);
        expect("goal", &mut t)?;
        let goal = Point::new(num(1, t.next())?, num(1, t.next())?);
        expect("dt", &mut t)?;
        let dt = num(1, t.next())?;
        let mut waypoints = Vec::new();
        for (i, line) in lines {
            let mut t = line.split_whitespace();
            waypoints.push(Point::new(num(i + 1, t.next())?, num(i + 1, t.next())?));
            if t.next().is_some() {
                return Err(err(i + 1, "trailing tokens"));
            }
        }
        Trajectory::new(start, goal, waypoints, dt)
    }
}

fn unflatten(x: &DVector<f64>) -> Vec<Point> {
    x.as_slice().chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect()
}

/// Sum of squared second differences over every interior waypoint, scaled by `1/dt^4`.
pub fn smoothness_cost(t: &Trajectory) -> (f64, DVector<f64>) {
    let pts: Vec<Point> = t.points().collect();
    let k = t.len();
    let scale = 1.0 / t.dt.powi(4);
    let mut value = 0.0;
    let mut grad = DVector::zeros(2 * k);
    for i in 1..=k {
        let s = pts[i + 1] - pts[i] * 2.0 + pts[i - 1];
        value += s.norm_squared() * scale;
        let ds = s * (2.0 * scale);
        // point index j maps to waypoint j-1; endpoints are fixed
        for (j, coef) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
            if (1..=k).contains(&j) {
                grad[2 * (j - 1)] += coef * ds.x;
                grad[2 * (j - 1) + 1] += coef * ds.y;
            }
        }
    }
    (value, grad)
}

/// Per-waypoint hinge `(d - eps)^2 / (2 eps)` for `d < eps`.
#[inline]
pub fn hinge_penalty(d: f64, epsilon: f64) -> (f64, f64) {
    if d < epsilon {
        let diff = d - epsilon;
        (diff * diff / (2.0 * epsilon), diff / epsilon)
    } else {
        (0.0, 0.0)
    }
}

/// Collision penalty summed at the interior waypoints.
pub fn collision_cost(t: &Trajectory, map: &EnvironmentMap, epsilon: f64) -> (f64, DVector<f64>) {
    let mut value = 0.0;
    let mut grad = DVector::zeros(t.dim());
    for (i, p) in t.waypoints.iter().enumerate() {
        let (d, g) = map.signed_distance(p);
        let (c, dc) = hinge_penalty(d, epsilon);
        value += c;
        grad[2 * i] += dc * g.x;
        grad[2 * i + 1] += dc * g.y;
    }
    (value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub smoothness: f64,
    pub collision: f64,
    /// Collision margin, meters.
    pub epsilon: f64,
}

impl CostWeights {
    pub fn new(smoothness: f64, collision: f64, epsilon: f64) -> Result<Self, PlannerError> {
        let w = Self { smoothness, collision, epsilon };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.smoothness >= 0.0 && self.collision >= 0.0) {
            return Err(PlannerError::InvalidWeights("weights must be non-negative".into()));
        }
        if self.smoothness == 0.0 && self.collision == 0.0 {
            return Err(PlannerError::InvalidWeights("weights cannot both be zero".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(PlannerError::InvalidWeights("collision margin must be positive".into()));
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { smoothness: 1.0, collision: 10.0, epsilon: 0.8 }
    }
}

/// Anything the solvers can minimize: value and gradient at a point.
pub trait Objective {
    fn evaluate(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    fn evaluate(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self(x)
    }
}

/// `w_d * J_d(x) + w_c * J_c(x, a)` for a fixed map.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub weights: CostWeights,
    pub map: EnvironmentMap,
}

impl CostModel {
    pub fn new(weights: CostWeights, map: EnvironmentMap) -> Self {
        Self { weights, map }
    }

    pub fn total_cost(&self, t: &Trajectory) -> (f64, DVector<f64>) {
        let (js, gs) = smoothness_cost(t);
        let (jc, gc) = collision_cost(t, &self.map, self.weights.epsilon);
        let w = &self.weights;
        (w.smoothness * js + w.collision * jc, gs * w.smoothness + gc * w.collision)
    }

    /// Binds the model to a trajectory's endpoints so it can be minimized over
    /// the flattened interior waypoints.
    pub fn objective<'a>(&'a self, template: &'a Trajectory) -> TrajectoryObjective<'a> {
        TrajectoryObjective { model: self, template }
    }

    /// Central differences of the analytic gradient, symmetrized.
    pub fn hessian(&self, t: &Trajectory) -> DMatrix<f64> {
        fd_hessian(&self.objective(t), &t.to_vector(), HESSIAN_STEP)
    }
}

pub struct TrajectoryObjective<'a> {
    model: &'a CostModel,
    template: &'a Trajectory,
}

impl Objective for TrajectoryObjective<'_> {
    fn evaluate(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let t = Trajectory { waypoints: unflatten(x), ..self.template.clone() };
        self.model.total_cost(&t)
    }
}

/// Hessian from central differences of `obj`'s gradient, returned as `(H + H^T) / 2`.
pub fn fd_hessian(obj: &impl Objective, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        probe[j] = x[j] + h;
        let (_, gp) = obj.evaluate(&probe);
        probe[j] = x[j] - h;
        let (_, gm) = obj.evaluate(&probe);
        probe[j] = x[j];
        hess.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    // elementwise addition commutes, so the result is exactly symmetric
    (&hess + hess.transpose()) * 0.5
}
