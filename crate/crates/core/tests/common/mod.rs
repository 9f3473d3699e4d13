//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use advplan::env::{Bounds, EnvironmentMap, Obstacle, Point};
use advplan::planner::{CostModel, CostWeights, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_map(rng: &mut ChaCha8Rng, n: usize) -> EnvironmentMap {
    let obstacles = (0..n)
        .map(|_| {
            let c = Point::new(rng.gen_range(2.0..18.0), rng.gen_range(2.0..18.0));
            Obstacle::new(c, rng.gen_range(0.4..1.5)).unwrap()
        })
        .collect();
    EnvironmentMap::new(Bounds::default(), obstacles).unwrap()
}

/// Jittered straight line between random endpoints.
pub fn random_trajectory(rng: &mut ChaCha8Rng, k: usize) -> Trajectory {
    let start = Point::new(rng.gen_range(0.5..3.0), rng.gen_range(1.0..19.0));
    let goal = Point::new(rng.gen_range(17.0..19.5), rng.gen_range(1.0..19.0));
    let mut t = Trajectory::straight_line(start, goal, k).unwrap();
    for w in &mut t.waypoints {
        *w += Point::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    }
    t
}

/// True when a waypoint sits within `tol` of a point where the nearest obstacle changes.
pub fn near_medial_axis(map: &EnvironmentMap, t: &Trajectory, tol: f64) -> bool {
    t.waypoints.iter().any(|p| {
        let mut d: Vec<f64> = map.obstacles().iter().map(|o| (p - o.center).norm() - o.radius).collect();
        d.sort_by(f64::total_cmp);
        d.len() >= 2 && d[1] - d[0] < tol
    })
}

/// Textbook cost evaluated from scratch: squared second differences plus the
/// hinge on the nearest-surface distance, with no shared code.
pub fn reference_cost(w: &CostWeights, map: &EnvironmentMap, t: &Trajectory) -> f64 {
    let mut pts = vec![t.start];
    pts.extend(t.waypoints.iter().copied());
    pts.push(t.goal);
    let mut smooth = 0.0;
    for i in 1..pts.len() - 1 {
        let a = pts[i + 1] - 2.0 * pts[i] + pts[i - 1];
        smooth += (a.x * a.x + a.y * a.y) / t.dt.powi(4);
    }
    let mut coll = 0.0;
    for p in &t.waypoints {
        let d = map
            .obstacles()
            .iter()
            .map(|o| ((p.x - o.center.x).powi(2) + (p.y - o.center.y).powi(2)).sqrt() - o.radius)
            .fold(f64::INFINITY, f64::min);
        if d < w.epsilon {
            coll += (d - w.epsilon).powi(2) / (2.0 * w.epsilon);
        }
    }
    w.smoothness * smooth + w.collision * coll
}

pub fn reference_value(model: &CostModel, t: &Trajectory, x: &DVector<f64>) -> f64 {
    reference_cost(&model.weights, &model.map, &t.with_vector(x).unwrap())
}

/// Central-difference gradient of the reference cost.
pub fn fd_gradient(model: &CostModel, t: &Trajectory, h: f64) -> DVector<f64> {
    let x = t.to_vector();
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (reference_value(model, t, &xp) - reference_value(model, t, &xm)) / (2.0 * h)
    })
}

/// `||g - g_fd|| / max(||g_fd||, 1)`.
pub fn gradient_rel_error(model: &CostModel, t: &Trajectory) -> f64 {
    let (_, g) = model.total_cost(t);
    let fd = fd_gradient(model, t, 1e-5);
    (g - &fd).norm() / fd.norm().max(1.0)
}

/// Second-order central differences of the reference cost value.
pub fn value_fd_hessian(model: &CostModel, t: &Trajectory, h: f64) -> DMatrix<f64> {
    let x = t.to_vector();
    let n = x.len();
    let f = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = x.clone();
        y[di] += si * h;
        y[dj] += sj * h;
        reference_value(model, t, &y)
    };
    DMatrix::from_fn(n, n, |i, j| (f(i, 1.0, j, 1.0) - f(i, 1.0, j, -1.0) - f(i, -1.0, j, 1.0) + f(i, -1.0, j, -1.0)) / (4.0 * h * h))
}

/// Eigenvalues by nalgebra's implicit-shift QR iteration, ascending.
pub fn qr_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}
