//! One adversarial trial: replan, advance, attack, classify.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrialConfig;
use crate::adversary::{
    self, adversary_step, bayes_opt_attack, deviation_angle, heading_rate, heuristic_attack, AttackConfig, GpHyper,
    Observation, PolicyKind,
};
use crate::diagnostics::{condition_number, trajectory_kappa};
use crate::env::{generate_scenario, EnvError, EnvironmentMap, Point, Scenario};
use crate::planner::{CostModel, Trajectory};
use crate::solver;

/// Mixed into the trial seed for the agent-level random stream so it does not
/// replay the map generator's draws.
const AGENT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Success,
    CollM,
    CollA,
    Timeout,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Success, Outcome::CollM, Outcome::CollA, Outcome::Timeout];
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::CollM => "coll_m",
            Outcome::CollA => "coll_a",
            Outcome::Timeout => "timeout",
        })
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.to_string() == s)
            .ok_or_else(|| format!("unknown outcome `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iterations: usize,
    pub converged: bool,
    /// Hessian condition number at the replan's final iterate (NaN when not logged).
    pub kappa_max: f64,
    /// Condition number of the BFGS inverse-Hessian approximation: the per-iterate
    /// maximum when tracked, else its terminal value. NaN for other methods.
    pub inverse_kappa: f64,
    pub replan_failed: bool,
    pub target_pos: Point,
    pub adversary_pos: Option<Point>,
    /// Placement the adversary steered toward this step.
    pub attack: Option<AttackConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub per_step: Vec<StepRecord>,
    /// GP training data gathered by a Bayesian-optimization adversary.
    pub gp_observations: Vec<Observation>,
}

impl TrialRecord {
    pub fn avg_iters(&self) -> f64 {
        if self.per_step.is_empty() {
            return 0.0;
        }
        self.per_step.iter().map(|s| s.iterations as f64).sum::<f64>() / self.per_step.len() as f64
    }

    pub fn max_iters(&self) -> usize {
        self.per_step.iter().map(|s| s.iterations).max().unwrap_or(0)
    }

    pub fn kappa_max(&self) -> f64 {
        self.per_step.iter().map(|s| s.kappa_max).filter(|k| !k.is_nan()).fold(f64::NAN, f64::max)
    }
}

/// Result of one replan from the target's current state.
struct Replan {
    plan: Trajectory,
    iterations: usize,
    converged: bool,
    inverse_kappa: f64,
    failed: bool,
}

struct Simulation<'a> {
    cfg: &'a TrialConfig,
    scenario: Scenario,
    rng: ChaCha8Rng,
}

impl Simulation<'_> {
    fn map_with_adversary(&self, adversary: Option<Point>) -> EnvironmentMap {
        match adversary {
            Some(a) => self.scenario.map.with_adversary(a, self.cfg.adversary_radius),
            None => self.scenario.map.clone(),
        }
    }

    fn model(&self, adversary: Option<Point>) -> CostModel {
        CostModel::new(self.cfg.cost_weights(), self.map_with_adversary(adversary))
    }

    fn replan(&self, model: &CostModel, warm: &Trajectory) -> Replan {
        match solver::minimize(model, warm, &self.cfg.solver) {
            Ok((plan, report)) => {
                let inverse_kappa = match report.bfgs_inverse_hessian() {
                    Ok(_) if !report.condition_numbers.is_empty() => {
                        report.condition_numbers.iter().copied().fold(f64::NAN, f64::max)
                    }
                    Ok(h) => condition_number(h).map(|r| r.condition_number).unwrap_or(f64::NAN),
                    Err(_) => f64::NAN,
                };
                Replan {
                    plan,
                    iterations: report.iterations,
                    converged: report.converged,
                    inverse_kappa,
                    failed: false,
                }
            }
            Err(_) => Replan {
                plan: warm.clone(),
                iterations: self.cfg.solver.max_iters,
                converged: false,
                inverse_kappa: f64::NAN,
                failed: true,
            },
        }
    }

    /// Velocity the target would leave with when following `plan` for one step.
    fn departure_velocity(&self, plan: &Trajectory) -> Point {
        (plan.point_at_arc_length(self.cfg.target_speed * self.cfg.dt) - plan.start) / self.cfg.dt
    }

    fn spawn_adversary(&mut self) -> Point {
        let b = *self.scenario.map.bounds();
        let clearance = self.cfg.adversary_radius + self.cfg.repulsion_margin;
        let min_gap = 4.0;
        let mut candidate = b.min + (b.max - b.min) * 0.5;
        for _ in 0..10_000 {
            candidate = Point::new(self.rng.gen_range(b.min.x..b.max.x), self.rng.gen_range(b.min.y..b.max.y));
            if self.scenario.map.min_separation(&candidate, None) >= clearance
                && (candidate - self.scenario.start).norm() >= min_gap
            {
                break;
            }
        }
        candidate
    }

    /// Projects the adversary out of the safety zone around the target's current
    /// and predicted next positions.
    fn keep_out(&self, adversary: Point, target: Point, velocity: Point) -> Point {
        // a hair outside the zone so the separation check cannot trip on rounding
        let zone = (self.cfg.adversary_radius + self.cfg.safety_radius) * (1.0 + 1e-9) + 1e-9;
        let mut a = adversary;
        for center in [target, target + velocity * self.cfg.dt] {
            let off = a - center;
            let d = off.norm();
            if d < zone {
                let dir = if d > 1e-12 {
                    off / d
                } else {
                    Point::new(-velocity.y, velocity.x).try_normalize(1e-12).unwrap_or(Point::new(0.0, 1.0))
                };
                a = center + dir * zone;
            }
        }
        self.scenario.map.bounds().clamp(&a)
    }
}

/// Runs one trial. Deterministic in `cfg` (including its seed).
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialRecord, EnvError> {
    let scenario = generate_scenario(&cfg.map_spec())?;
    let mut sim = Simulation { cfg, scenario, rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ AGENT_STREAM) };
    let (start, goal) = (sim.scenario.start, sim.scenario.goal);

    // drawn for every policy so paired arms see the same spawn
    let spawn = sim.spawn_adversary();
    let line_heading = sim.rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let attacking = cfg.policy.kind != PolicyKind::None;
    let mut adversary = attacking.then_some(spawn);

    let mut target = start;
    // the target sets off with a plan already computed; only online replans are recorded
    let straight = Trajectory::straight_line(start, goal, cfg.waypoints).expect("waypoints >= 1");
    let initial = sim.replan(&sim.model(adversary), &straight);
    let mut plan = if initial.failed { straight } else { initial.plan };
    let mut heading: Option<f64> = None;
    let mut gp_data: Vec<Observation> = Vec::new();
    let mut per_step = Vec::new();
    let step_len = cfg.target_speed * cfg.dt;
    let mut outcome = Outcome::Timeout;

    for step in 1..=cfg.max_steps {
        // 1. replan with the adversary as one more obstacle
        let model = sim.model(adversary);
        let replan = sim.replan(&model, &plan);
        if !replan.failed {
            plan = replan.plan;
        }
        let kappa_max = if cfg.log_kappa { trajectory_kappa(&model, &plan) } else { f64::NAN };

        // 2. advance at constant speed along the current plan
        let next = if (goal - target).norm() <= step_len { goal } else { plan.point_at_arc_length(step_len) };
        let velocity = (next - target) / cfg.dt;
        plan = plan.tail(step_len, cfg.waypoints).expect("waypoints >= 1");
        target = next;
        let previous_heading = heading;
        if velocity.norm() > 1e-9 {
            heading = Some(velocity.y.atan2(velocity.x));
        }

        // 3. adversary picks a placement and moves toward it
        let mut attack = None;
        if let Some(adv) = adversary {
            let aim = match cfg.policy.kind {
                PolicyKind::Heuristic => {
                    let theta = heading.unwrap_or(0.0);
                    let rate = match previous_heading {
                        Some(prev) => heading_rate(prev, theta, cfg.dt),
                        None => 0.0,
                    };
                    let a = heuristic_attack(theta, rate, cfg.dt, &cfg.policy);
                    attack = Some(a);
                    a.position(&target)
                }
                PolicyKind::BayesOpt => {
                    let nominal = sim.departure_velocity(&sim.replan(&sim.model(None), &plan).plan);
                    let hyper = if cfg.gp_tune && gp_data.len() >= 3 {
                        tune_grid(&gp_data, cfg.gp_hyper)
                    } else {
                        cfg.gp_hyper
                    };
                    let mut bo_rng = ChaCha8Rng::seed_from_u64(sim.rng.gen());
                    let probe = |c: AttackConfig| {
                        let probe_model = sim.model(Some(c.position(&target)));
                        let probed = sim.replan(&probe_model, &plan);
                        deviation_angle(&sim.departure_velocity(&probed.plan), &nominal)
                    };
                    match bayes_opt_attack(&gp_data, hyper, &cfg.policy, &mut bo_rng, probe) {
                        Ok(res) => {
                            gp_data.extend(res.observations);
                            if gp_data.len() > cfg.gp_history {
                                gp_data.drain(..gp_data.len() - cfg.gp_history);
                            }
                            attack = Some(res.best);
                            res.best.position(&target)
                        }
                        // GP failure leaves the adversary in place
                        Err(_) => adv,
                    }
                }
                PolicyKind::RandomLine => {
                    adv + Point::new(line_heading.cos(), line_heading.sin()) * (cfg.adversary_vmax * cfg.dt)
                }
                PolicyKind::None => unreachable!("no adversary without a policy"),
            };
            let mut moved = adversary_step(&adv, &aim, cfg.adversary_vmax, cfg.dt, &sim.scenario.map, cfg.repulsion_margin);
            if !cfg.ignore_safety_radius {
                moved = sim.keep_out(moved, target, velocity);
            }
            adversary = Some(moved);
        }

        per_step.push(StepRecord {
            iterations: replan.iterations,
            converged: replan.converged,
            kappa_max,
            inverse_kappa: replan.inverse_kappa,
            replan_failed: replan.failed,
            target_pos: target,
            adversary_pos: adversary,
            attack,
        });

        // 4. classify
        if let Some(adv) = adversary {
            let separation = (target - adv).norm() - cfg.adversary_radius;
            let limit = if cfg.ignore_safety_radius { 0.0 } else { cfg.safety_radius };
            if separation < limit {
                outcome = Outcome::CollA;
                break;
            }
        }
        if sim.scenario.map.signed_distance(&target).0 < 0.0 {
            outcome = Outcome::CollM;
            break;
        }
        if (target - goal).norm() <= cfg.goal_radius {
            outcome = Outcome::Success;
            break;
        }
        if step == cfg.max_steps {
            outcome = Outcome::Timeout;
        }
    }

    Ok(TrialRecord { seed: cfg.seed, outcome, steps: per_step.len(), per_step, gp_observations: gp_data })
}

fn tune_grid(data: &[Observation], base: GpHyper) -> GpHyper {
    adversary::tune_hyperparameters(data, base, &[0.25, 0.5, 1.0, 2.0], &[0.5, 1.0, 2.0], &[0.25, 1.0, 4.0])
        .unwrap_or(base)
}
