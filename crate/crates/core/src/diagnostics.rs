//! Spectral diagnostics of the planning problem and the single-obstacle sweep.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::env::{Bounds, EnvironmentMap, Obstacle, Point};
use crate::planner::{CostModel, CostWeights, Trajectory};
use crate::solver::{self, SolverConfig};

/// Largest tolerated `|M_ij - M_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Jacobi sweeps stop once the off-diagonal Frobenius norm drops below this.
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;
/// Smallest eigenvalue magnitude treated as non-singular.
pub const SINGULAR_FLOOR: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("matrix is not symmetric: |M[{i},{j}] - M[{j},{i}]| = {gap:e}")]
    NonSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), DiagnosticsError> {
    if !m.is_square() {
        return Err(DiagnosticsError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOL) {
                return Err(DiagnosticsError::NonSymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn eigen_symmetric(m: &DMatrix<f64>) -> Result<Vec<f64>, DiagnosticsError> {
    check_symmetric(m)?;
    let n = m.nrows();
    // work on the exactly symmetric part
    let mut a = (m + m.transpose()) * 0.5;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < OFF_DIAGONAL_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `max|λ| / min|λ|`, or `f64::INFINITY` when `min|λ| <= SINGULAR_FLOOR`.
    pub condition_number: f64,
    pub min_abs_eig: f64,
}

pub fn condition_number(m: &DMatrix<f64>) -> Result<SpectralReport, DiagnosticsError> {
    let eigenvalues = eigen_symmetric(m)?;
    let abs = eigenvalues.iter().map(|l| l.abs());
    let min_abs_eig = abs.clone().fold(f64::INFINITY, f64::min);
    let max_abs_eig = abs.fold(0.0, f64::max);
    let condition_number = if min_abs_eig > SINGULAR_FLOOR { max_abs_eig / min_abs_eig } else { f64::INFINITY };
    Ok(SpectralReport { eigenvalues, condition_number, min_abs_eig })
}

/// Condition number of the planner Hessian at `t`.
pub fn trajectory_kappa(model: &CostModel, t: &Trajectory) -> f64 {
    condition_number(&model.hessian(t))
        .map(|r| r.condition_number)
        .unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOutcome {
    Success,
    Failure,
}

impl std::fmt::Display for SweepOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepOutcome::Success => "success",
            SweepOutcome::Failure => "failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub obstacle_position: Point,
    pub outcome: SweepOutcome,
    pub iterations: usize,
    pub condition_number: f64,
}

/// Problem definition for a single-obstacle sweep.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    /// Model holding every obstacle except the swept one.
    pub base: CostModel,
    pub start: Point,
    pub goal: Point,
    pub waypoints: usize,
    pub obstacle_radius: f64,
    /// Cells per side.
    pub grid: usize,
}

impl SweepSetup {
    /// Horizontal corridor across an empty default-size world, running through
    /// the centers of the middle row of cells so obstacles can sit squarely on it.
    pub fn corridor(weights: CostWeights, waypoints: usize, obstacle_radius: f64, grid: usize) -> Self {
        let bounds = Bounds::default();
        let row = (grid / 2) as f64 + 0.5;
        let mid = bounds.min.y + row * bounds.height() / grid.max(1) as f64;
        Self {
            base: CostModel::new(weights, EnvironmentMap::empty(bounds)),
            start: Point::new(bounds.min.x, mid),
            goal: Point::new(bounds.max.x, mid),
            waypoints,
            obstacle_radius,
            grid,
        }
    }

    /// Cell centers in row-major order (y outer, x inner) over the map bounds.
    pub fn cell_centers(&self) -> Vec<Point> {
        let b = self.base.map.bounds();
        let g = self.grid as f64;
        let (dx, dy) = (b.width() / g, b.height() / g);
        (0..self.grid)
            .flat_map(|row| {
                (0..self.grid).map(move |col| {
                    Point::new(b.min.x + (col as f64 + 0.5) * dx, b.min.y + (row as f64 + 0.5) * dy)
                })
            })
            .collect()
    }

    /// Solves the problem with one obstacle at `center` from the straight-line start.
    pub fn evaluate(&self, center: Point, cfg: &SolverConfig) -> SweepCell {
        let model = CostModel::new(
            self.base.weights,
            self.base.map.with_obstacle(Obstacle { center, radius: self.obstacle_radius }),
        );
        let init = Trajectory::straight_line(self.start, self.goal, self.waypoints)
            .expect("sweep needs at least one waypoint");
        let (outcome, iterations, kappa) = match solver::minimize(&model, &init, cfg) {
            Ok((best, report)) => {
                let collided = path_clearance(&model.map, &best) < 0.0;
                let timed_out = !report.converged && report.iterations >= cfg.max_iters;
                let outcome = if collided || timed_out { SweepOutcome::Failure } else { SweepOutcome::Success };
                (outcome, report.iterations, trajectory_kappa(&model, &best))
            }
            Err(_) => (SweepOutcome::Failure, 0, f64::INFINITY),
        };
        SweepCell { obstacle_position: center, outcome, iterations, condition_number: kappa }
    }
}

/// Smallest obstacle clearance along the polyline start, waypoints, goal.
pub fn path_clearance(map: &EnvironmentMap, t: &Trajectory) -> f64 {
    let points: Vec<Point> = std::iter::once(t.start).chain(t.waypoints.iter().copied()).chain(std::iter::once(t.goal)).collect();
    points.windows(2).map(|w| map.segment_clearance(&w[0], &w[1])).fold(f64::INFINITY, f64::min)
}

/// One solve per grid cell with a single extra obstacle placed at the cell center.
pub fn obstacle_sweep(setup: &SweepSetup, cfg: &SolverConfig) -> Vec<SweepCell> {
    assert!(setup.grid >= 2, "sweep grid needs at least 2 cells per side");
    let centers = setup.cell_centers();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        centers.par_iter().map(|c| setup.evaluate(*c, cfg)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        centers.iter().map(|c| setup.evaluate(*c, cfg)).collect()
    }
}

/// `cx,cy,outcome,iterations,kappa`
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("cx,cy,outcome,iterations,kappa\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.obstacle_position.x, c.obstacle_position.y, c.outcome, c.iterations, c.condition_number
        );
    }
    s
}
