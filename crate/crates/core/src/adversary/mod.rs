//! Attack placement for an adversary that only observes the target's motion.
//!
//! Attack configurations are target-relative polar coordinates `(θ, r)`. The
//! black-box attack fits a GP to observed heading deviations and picks the next
//! probe by expected improvement; the closed-form heuristic leads the target's
//! heading by half of its recent turn.

pub mod gp;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::env::{EnvironmentMap, Point};
pub use gp::{tune_hyperparameters, GpError, GpHyper, GpModel};

/// Candidates scored by the acquisition function per BO iteration.
pub const BO_CANDIDATES: usize = 512;

/// Target-relative polar placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub theta: f64,
    pub r: f64,
}

impl AttackConfig {
    pub fn new(theta: f64, r: f64) -> Self {
        Self { theta, r }
    }

    /// World position of this placement around `origin`.
    pub fn position(&self, origin: &Point) -> Point {
        origin + Point::new(self.theta.cos(), self.theta.sin()) * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub config: AttackConfig,
    /// Heading deviation in radians, within `[0, π]`.
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    BayesOpt,
    Heuristic,
    RandomLine,
    None,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bayesopt" | "bo" => Ok(PolicyKind::BayesOpt),
            "heuristic" => Ok(PolicyKind::Heuristic),
            "randomline" | "random" => Ok(PolicyKind::RandomLine),
            "none" => Ok(PolicyKind::None),
            other => Err(format!("unknown attack policy `{other}`")),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyKind::BayesOpt => "bayes_opt",
            PolicyKind::Heuristic => "heuristic",
            PolicyKind::RandomLine => "random_line",
            PolicyKind::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPolicy {
    pub kind: PolicyKind,
    /// Allowed attack radius `(min, max)`, meters.
    pub r_bounds: (f64, f64),
    pub bo_iters: usize,
    pub ei_xi: f64,
}

impl Default for AttackPolicy {
    fn default() -> Self {
        Self { kind: PolicyKind::Heuristic, r_bounds: (0.5, 2.0), bo_iters: 10, ei_xi: 0.01 }
    }
}

impl AttackPolicy {
    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = self.r_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(format!("r_bounds ({lo}, {hi}) needs 0 < min <= max"));
        }
        if self.kind == PolicyKind::BayesOpt && self.bo_iters < 1 {
            return Err("bo_iters must be at least 1".into());
        }
        Ok(())
    }

    pub fn mid_radius(&self) -> f64 {
        0.5 * (self.r_bounds.0 + self.r_bounds.1)
    }
}

/// Angle between two velocity vectors in `[0, π]`; zero if either is degenerate.
pub fn deviation_angle(v: &Point, v0: &Point) -> f64 {
    let (n, n0) = (v.norm(), v0.norm());
    if n <= 1e-9 || n0 <= 1e-9 {
        return 0.0;
    }
    (v.dot(v0) / (n * n0)).clamp(-1.0, 1.0).acos()
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Backward-difference turn rate from two observed headings.
pub fn heading_rate(previous: f64, current: f64, dt: f64) -> f64 {
    wrap_angle(current - previous) / dt
}

/// `θ_a = θ_r + 0.5 Δt dθ/dt` with the turn rate clamped to `[-π/2, π/2]`;
/// the radius is the middle of the policy's bounds.
pub fn heuristic_attack(theta_r: f64, dtheta_dt: f64, delta_t: f64, policy: &AttackPolicy) -> AttackConfig {
    let rate = dtheta_dt.clamp(-FRAC_PI_2, FRAC_PI_2);
    AttackConfig { theta: theta_r + 0.5 * delta_t * rate, r: policy.mid_radius() }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, variance: f64, best: f64, xi: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let gain = mean - best - xi;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesOptResult {
    /// Highest-deviation configuration probed during this call.
    pub best: AttackConfig,
    pub best_deviation: f64,
    /// Observations made during this call, in probe order.
    pub observations: Vec<Observation>,
}

/// Bayesian optimization of a black-box deviation function.
///
/// Each iteration fits the GP to `prior` plus everything probed so far, scores
/// [`BO_CANDIDATES`] uniform candidates in `[-π, π] × r_bounds` and the incumbent
/// by expected improvement, and probes the maximizer. With no data at all the
/// first candidate is probed.
pub fn bayes_opt_attack<R: Rng + ?Sized>(
    prior: &[Observation],
    hyper: GpHyper,
    policy: &AttackPolicy,
    rng: &mut R,
    mut probe: impl FnMut(AttackConfig) -> f64,
) -> Result<BayesOptResult, GpError> {
    let iterations = policy.bo_iters.max(1);
    let (r_lo, r_hi) = policy.r_bounds;
    let mut data: Vec<Observation> = prior.to_vec();
    let mut fresh: Vec<Observation> = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut candidates: Vec<AttackConfig> = (0..BO_CANDIDATES)
            .map(|_| {
                let theta = rng.gen_range(-PI..=PI);
                let r = if r_hi > r_lo { r_lo + (r_hi - r_lo) * rng.gen::<f64>() } else { r_lo };
                AttackConfig { theta, r }
            })
            .collect();
        let incumbent = data.iter().copied().reduce(|a, b| if b.deviation > a.deviation { b } else { a });
        let choice = match incumbent {
            None => candidates[0],
            Some(inc) => {
                candidates.push(inc.config);
                let model = GpModel::fit(data.clone(), hyper)?;
                let mut best = (f64::NEG_INFINITY, candidates[0]);
                for c in &candidates {
                    let (m, v) = model.predict(c);
                    let ei = expected_improvement(m, v, inc.deviation, policy.ei_xi);
                    if ei > best.0 {
                        best = (ei, *c);
                    }
                }
                best.1
            }
        };
        let obs = Observation { config: choice, deviation: probe(choice) };
        data.push(obs);
        fresh.push(obs);
    }
    let top = fresh
        .iter()
        .copied()
        .reduce(|a, b| if b.deviation > a.deviation { b } else { a })
        .expect("at least one probe");
    Ok(BayesOptResult { best: top.config, best_deviation: top.deviation, observations: fresh })
}

/// Moves at most `v_max * dt` toward `attack_target`, then pushes away from
/// obstacles closer than `margin` by `(margin - d)` along the distance gradient,
/// and clamps to the map bounds.
pub fn adversary_step(
    current: &Point,
    attack_target: &Point,
    v_max: f64,
    dt: f64,
    map: &EnvironmentMap,
    margin: f64,
) -> Point {
    let to_target = attack_target - current;
    let reach = v_max * dt;
    let dist = to_target.norm();
    let mut next = if dist <= reach { *attack_target } else { current + to_target * (reach / dist) };
    let mut push = Point::zeros();
    for o in map.obstacles() {
        let (d, g) = o.distance(&next);
        if d < margin {
            push += g * (margin - d);
        }
    }
    next += push;
    map.bounds().clamp(&next)
}
