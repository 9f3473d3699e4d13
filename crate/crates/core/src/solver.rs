//! Gradient descent, BFGS and L-BFGS with Armijo backtracking.
//!
//! Every solver returns the best iterate it accepted together with a
//! [`SolverReport`] holding the full iterate history. A non-finite value or
//! gradient aborts the solve with [`SolverError::NonFiniteObjective`].

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::diagnostics;
use crate::planner::{CostModel, Objective, Trajectory};

/// Quasi-Newton updates are skipped when `y^T s <= CURVATURE_FLOOR * |y| |s|`.
/// Relative to the pair's size, so shrinking steps near a minimum keep updating.
pub const CURVATURE_FLOOR: f64 = 1e-10;

fn curvature_ok(s: &DVector<f64>, y: &DVector<f64>) -> bool {
    y.dot(s) > CURVATURE_FLOOR * y.norm() * s.norm()
}

/// Backtracking gives up once the step falls below this.
const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error("inverse-Hessian approximation is only maintained by BFGS")]
    NotSupported,
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GradientDescent,
    Bfgs,
    Lbfgs,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Method::GradientDescent),
            "bfgs" => Ok(Method::Bfgs),
            "lbfgs" | "l-bfgs" => Ok(Method::Lbfgs),
            other => Err(format!("unknown solver method `{other}`")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::GradientDescent => "gd",
            Method::Bfgs => "bfgs",
            Method::Lbfgs => "lbfgs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearch {
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub lbfgs_memory: usize,
    pub line_search: LineSearch,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Record the condition number of the BFGS inverse-Hessian approximation at
    /// every iterate. Costs one dense eigen-decomposition per iteration.
    pub track_inverse_kappa: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Bfgs,
            max_iters: 200,
            grad_tol: 1e-6,
            lbfgs_memory: 10,
            line_search: LineSearch::Backtracking,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            track_inverse_kappa: false,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if self.lbfgs_memory < 1 {
            return bad("lbfgs_memory must be at least 1");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub final_value: f64,
    pub final_grad_norm: f64,
    pub iterates: Vec<DVector<f64>>,
    /// Per-iterate condition numbers, when tracked.
    pub condition_numbers: Vec<f64>,
    inverse_hessian: Option<DMatrix<f64>>,
}

impl SolverReport {
    /// Final inverse-Hessian approximation. Only BFGS maintains one.
    pub fn bfgs_inverse_hessian(&self) -> Result<&DMatrix<f64>, SolverError> {
        self.inverse_hessian.as_ref().ok_or(SolverError::NotSupported)
    }

    pub fn best_iterate(&self) -> &DVector<f64> {
        self.iterates.last().expect("report always holds the initial point")
    }
}

/// Dense BFGS inverse-Hessian approximation, starting from the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseHessian {
    matrix: DMatrix<f64>,
    updates: usize,
}

impl InverseHessian {
    pub fn identity(n: usize) -> Self {
        Self { matrix: DMatrix::identity(n, n), updates: 0 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn reset(&mut self) {
        self.matrix.fill_with_identity();
    }

    /// `H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T`, skipped when the
    /// curvature test fails. Returns whether the update was applied.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        if !curvature_ok(s, y) {
            return false;
        }
        let ys = y.dot(s);
        let rho = 1.0 / ys;
        let hy = &self.matrix * y;
        let yhy = y.dot(&hy);
        // expanded form: H - rho (Hy s^T + s y^T H) + (rho^2 y^T H y + rho) s s^T
        let coef = rho * rho * yhy + rho;
        let n = s.len();
        for j in 0..n {
            for i in 0..n {
                self.matrix[(i, j)] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
            }
        }
        // the expanded update is symmetric in exact arithmetic; enforce it bitwise
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (self.matrix[(i, j)] + self.matrix[(j, i)]);
                self.matrix[(i, j)] = v;
                self.matrix[(j, i)] = v;
            }
        }
        self.updates += 1;
        true
    }

    pub fn direction(&self, g: &DVector<f64>) -> DVector<f64> {
        -(&self.matrix * g)
    }
}

/// Limited-memory pairs and the two-loop recursion.
#[derive(Debug, Clone)]
struct LbfgsMemory {
    pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    capacity: usize,
}

impl LbfgsMemory {
    fn new(capacity: usize) -> Self {
        Self { pairs: VecDeque::with_capacity(capacity), capacity }
    }

    fn push(&mut self, s: DVector<f64>, y: DVector<f64>) {
        if !curvature_ok(&s, &y) {
            return;
        }
        let ys = y.dot(&s);
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / ys));
    }

    fn direction(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            q *= s.dot(y) / y.dot(y);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&q);
            q.axpy(a - b, s, 1.0);
        }
        -q
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }
}

enum Direction {
    Steepest,
    Bfgs(InverseHessian),
    Lbfgs(LbfgsMemory),
}

impl Direction {
    fn compute(&self, g: &DVector<f64>) -> DVector<f64> {
        match self {
            Direction::Steepest => -g,
            Direction::Bfgs(h) => h.direction(g),
            Direction::Lbfgs(m) => m.direction(g),
        }
    }

    fn reset(&mut self) {
        match self {
            Direction::Steepest => {}
            Direction::Bfgs(h) => h.reset(),
            Direction::Lbfgs(m) => m.clear(),
        }
    }

    fn is_reset(&self) -> bool {
        match self {
            Direction::Steepest => true,
            Direction::Bfgs(h) => *h.matrix() == DMatrix::identity(h.matrix().nrows(), h.matrix().ncols()),
            Direction::Lbfgs(m) => m.pairs.is_empty(),
        }
    }

    fn update(&mut self, s: DVector<f64>, y: DVector<f64>) {
        match self {
            Direction::Steepest => {}
            Direction::Bfgs(h) => {
                h.update(&s, &y);
            }
            Direction::Lbfgs(m) => m.push(s, y),
        }
    }
}

fn finite(v: f64, g: &DVector<f64>) -> bool {
    v.is_finite() && g.iter().all(|x| x.is_finite())
}

/// Accepted point, its value and its gradient.
type Accepted = (DVector<f64>, f64, DVector<f64>);

/// Armijo backtracking from a unit step. Returns the accepted point, or `None`
/// when the step shrinks below `MIN_STEP` without sufficient decrease.
fn backtrack(
    obj: &impl Objective,
    x: &DVector<f64>,
    f: f64,
    slope: f64,
    d: &DVector<f64>,
    cfg: &SolverConfig,
    iteration: usize,
) -> Result<Option<Accepted>, SolverError> {
    let mut alpha = 1.0;
    while alpha >= MIN_STEP {
        let trial = x + d * alpha;
        let (ft, gt) = obj.evaluate(&trial);
        if !finite(ft, &gt) {
            return Err(SolverError::NonFiniteObjective { iteration });
        }
        // a step whose decrease is below rounding is not progress
        if ft < f && ft <= f + cfg.armijo_c * alpha * slope {
            return Ok(Some((trial, ft, gt)));
        }
        alpha *= cfg.backtrack_factor;
    }
    Ok(None)
}

/// Minimizes an arbitrary objective from `x0`.
pub fn minimize_objective(
    obj: &impl Objective,
    x0: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    cfg.validate()?;
    let n = x0.len();
    let (mut f, mut g) = obj.evaluate(&x0);
    if !finite(f, &g) {
        return Err(SolverError::NonFiniteObjective { iteration: 0 });
    }
    let mut dir = match cfg.method {
        Method::GradientDescent => Direction::Steepest,
        Method::Bfgs => Direction::Bfgs(InverseHessian::identity(n)),
        Method::Lbfgs => Direction::Lbfgs(LbfgsMemory::new(cfg.lbfgs_memory)),
    };
    let track = cfg.track_inverse_kappa && cfg.method == Method::Bfgs;
    let mut condition_numbers = Vec::new();
    let record_kappa = |dir: &Direction, out: &mut Vec<f64>| {
        if let (true, Direction::Bfgs(h)) = (track, dir) {
            if let Ok(r) = diagnostics::condition_number(h.matrix()) {
                out.push(r.condition_number);
            }
        }
    };
    record_kappa(&dir, &mut condition_numbers);

    let mut x = x0;
    let mut iterates = vec![x.clone()];
    let mut converged = g.norm() <= cfg.grad_tol;
    while !converged && iterates.len() <= cfg.max_iters {
        let iteration = iterates.len();
        let mut d = dir.compute(&g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            dir.reset();
            d = -&g;
            slope = -g.norm_squared();
        }
        let mut step = backtrack(obj, &x, f, slope, &d, cfg, iteration)?;
        if step.is_none() && !dir.is_reset() {
            // the quasi-Newton model went bad; retry along the gradient
            dir.reset();
            d = -&g;
            slope = -g.norm_squared();
            step = backtrack(obj, &x, f, slope, &d, cfg, iteration)?;
        }
        let Some((x_new, f_new, g_new)) = step else { break };
        dir.update(&x_new - &x, &g_new - &g);
        x = x_new;
        f = f_new;
        g = g_new;
        iterates.push(x.clone());
        record_kappa(&dir, &mut condition_numbers);
        converged = g.norm() <= cfg.grad_tol;
    }

    let inverse_hessian = match dir {
        Direction::Bfgs(h) => Some(h.matrix),
        _ => None,
    };
    Ok(SolverReport {
        method: cfg.method,
        converged,
        iterations: iterates.len() - 1,
        final_value: f,
        final_grad_norm: g.norm(),
        iterates,
        condition_numbers,
        inverse_hessian,
    })
}

/// Minimizes the planner objective over the interior waypoints of `init`.
pub fn minimize(
    model: &CostModel,
    init: &Trajectory,
    cfg: &SolverConfig,
) -> Result<(Trajectory, SolverReport), SolverError> {
    let report = minimize_objective(&model.objective(init), init.to_vector(), cfg)?;
    let best = init
        .with_vector(report.best_iterate())
        .expect("solver preserves the decision dimension");
    Ok((best, report))
}
