//! Browser bindings: an obstacle sweep heatmap, a single corridor solve, and
//! trial playback.

use advplan::adversary::PolicyKind;
use advplan::diagnostics::{obstacle_sweep, path_clearance, trajectory_kappa, SweepOutcome, SweepSetup};
use advplan::env::{Obstacle, Point};
use advplan::harness::{run_trial, TrialConfig, WeightsPreset};
use advplan::planner::{CostModel, CostWeights, Trajectory};
use advplan::solver::{minimize, SolverConfig};
use wasm_bindgen::prelude::*;

const WAYPOINTS: usize = 20;

fn weights(conservative: bool) -> CostWeights {
    let mut cfg = TrialConfig::default();
    if conservative {
        cfg.weights_config = WeightsPreset::Conservative;
    }
    cfg.cost_weights()
}

/// Per-cell results of an obstacle sweep, row-major from the bottom-left cell.
#[wasm_bindgen]
pub struct SweepGrid {
    grid: usize,
    iterations: Vec<u32>,
    kappa: Vec<f64>,
    failed: Vec<u8>,
    free_kappa: f64,
    corridor_y: f64,
}

#[wasm_bindgen]
impl SweepGrid {
    #[wasm_bindgen(getter)]
    pub fn grid(&self) -> usize {
        self.grid
    }
    pub fn iterations(&self) -> Vec<u32> {
        self.iterations.clone()
    }
    pub fn kappa(&self) -> Vec<f64> {
        self.kappa.clone()
    }
    pub fn failed(&self) -> Vec<u8> {
        self.failed.clone()
    }
    #[wasm_bindgen(getter, js_name = freeKappa)]
    pub fn free_kappa(&self) -> f64 {
        self.free_kappa
    }
    #[wasm_bindgen(getter, js_name = corridorY)]
    pub fn corridor_y(&self) -> f64 {
        self.corridor_y
    }
}

/// Solves the corridor problem once per grid cell with an obstacle placed there.
#[wasm_bindgen]
pub fn sweep(grid: usize, radius: f64, conservative: bool) -> Result<SweepGrid, JsError> {
    if !(2..=60).contains(&grid) || radius.is_nan() || radius <= 0.0 {
        return Err(JsError::new("grid must be 2..=60 and radius positive"));
    }
    let setup = SweepSetup::corridor(weights(conservative), WAYPOINTS, radius, grid);
    let cells = obstacle_sweep(&setup, &SolverConfig::default());
    let free = Trajectory::straight_line(setup.start, setup.goal, WAYPOINTS).expect("waypoints >= 1");
    Ok(SweepGrid {
        grid,
        iterations: cells.iter().map(|c| c.iterations as u32).collect(),
        kappa: cells.iter().map(|c| c.condition_number).collect(),
        failed: cells.iter().map(|c| u8::from(c.outcome == SweepOutcome::Failure)).collect(),
        free_kappa: trajectory_kappa(&setup.base, &free),
        corridor_y: setup.start.y,
    })
}

#[wasm_bindgen]
pub struct Solve {
    path: Vec<f64>,
    iterations: usize,
    kappa: f64,
    clearance: f64,
    converged: bool,
}

#[wasm_bindgen]
impl Solve {
    /// Flattened `x, y` pairs from start to goal.
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    #[wasm_bindgen(getter)]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    #[wasm_bindgen(getter)]
    pub fn clearance(&self) -> f64 {
        self.clearance
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Plans the corridor of a `grid`-cell sweep from a straight line with one
/// obstacle at `(x, y)`.
#[wasm_bindgen(js_name = solveWithObstacle)]
pub fn solve_with_obstacle(x: f64, y: f64, radius: f64, grid: usize, conservative: bool) -> Result<Solve, JsError> {
    if grid < 2 {
        return Err(JsError::new("grid must be at least 2"));
    }
    let setup = SweepSetup::corridor(weights(conservative), WAYPOINTS, radius, grid);
    let obstacle = Obstacle::new(Point::new(x, y), radius).map_err(|e| JsError::new(&e.to_string()))?;
    let model = CostModel::new(setup.base.weights, setup.base.map.with_obstacle(obstacle));
    let init = Trajectory::straight_line(setup.start, setup.goal, WAYPOINTS).expect("waypoints >= 1");
    let (best, report) = minimize(&model, &init, &SolverConfig::default()).map_err(|e| JsError::new(&e.to_string()))?;
    let mut path = vec![best.start.x, best.start.y];
    for p in &best.waypoints {
        path.extend([p.x, p.y]);
    }
    path.extend([best.goal.x, best.goal.y]);
    Ok(Solve {
        path,
        iterations: report.iterations,
        kappa: trajectory_kappa(&model, &best),
        clearance: path_clearance(&model.map, &best),
        converged: report.converged,
    })
}

#[wasm_bindgen]
pub struct Playback {
    outcome: String,
    obstacles: Vec<f64>,
    target: Vec<f64>,
    adversary: Vec<f64>,
    iterations: Vec<u32>,
    goal: Vec<f64>,
}

#[wasm_bindgen]
impl Playback {
    #[wasm_bindgen(getter)]
    pub fn outcome(&self) -> String {
        self.outcome.clone()
    }
    /// Flattened `x, y, radius` triples.
    pub fn obstacles(&self) -> Vec<f64> {
        self.obstacles.clone()
    }
    /// Flattened target positions, one `x, y` pair per step (start first).
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }
    /// Flattened adversary positions per step; empty without an adversary.
    pub fn adversary(&self) -> Vec<f64> {
        self.adversary.clone()
    }
    pub fn iterations(&self) -> Vec<u32> {
        self.iterations.clone()
    }
    pub fn goal(&self) -> Vec<f64> {
        self.goal.clone()
    }
}

/// Runs one seeded trial on a dense map and returns its trajectory for playback.
#[wasm_bindgen(js_name = playTrial)]
pub fn play_trial(seed: u64, policy: &str, conservative: bool) -> Result<Playback, JsError> {
    let mut cfg = TrialConfig { seed, log_kappa: false, ..TrialConfig::default() };
    cfg.policy.kind = policy.parse::<PolicyKind>().map_err(|e| JsError::new(&e))?;
    if conservative {
        cfg.weights_config = WeightsPreset::Conservative;
    }
    let scenario = advplan::env::generate_scenario(&cfg.map_spec()).map_err(|e| JsError::new(&e.to_string()))?;
    let record = run_trial(&cfg).map_err(|e| JsError::new(&e.to_string()))?;
    let mut target = vec![scenario.start.x, scenario.start.y];
    let mut adversary = Vec::new();
    for s in &record.per_step {
        target.extend([s.target_pos.x, s.target_pos.y]);
        if let Some(a) = s.adversary_pos {
            adversary.extend([a.x, a.y]);
        }
    }
    Ok(Playback {
        outcome: record.outcome.to_string(),
        obstacles: scenario.map.obstacles().iter().flat_map(|o| [o.center.x, o.center.y, o.radius]).collect(),
        target,
        adversary,
        iterations: record.per_step.iter().map(|s| s.iterations as u32).collect(),
        goal: vec![scenario.goal.x, scenario.goal.y, cfg.goal_radius],
    })
}
