//! Trial configuration and its flat `key = value` file format.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::adversary::{AttackPolicy, GpHyper, PolicyKind};
use crate::env::{MapKind, MapSpec};
use crate::planner::CostWeights;
use crate::solver::{LineSearch, Method, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightsPreset {
    Default,
    Conservative,
}

impl std::str::FromStr for WeightsPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "default" => Ok(WeightsPreset::Default),
            "conservative" => Ok(WeightsPreset::Conservative),
            other => Err(format!("unknown weights preset `{other}`")),
        }
    }
}

impl std::fmt::Display for WeightsPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightsPreset::Default => "default",
            WeightsPreset::Conservative => "conservative",
        })
    }
}

/// Everything one adversarial trial depends on. The trial seed also seeds the map.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub map_kind: MapKind,
    pub obstacle_count: usize,
    pub radius_range: (f64, f64),

    pub weights_config: WeightsPreset,
    pub smoothness_weight: f64,
    pub collision_weight_default: f64,
    pub collision_weight_conservative: f64,
    pub epsilon: f64,
    pub waypoints: usize,

    pub solver: SolverConfig,
    pub policy: AttackPolicy,
    pub gp_hyper: GpHyper,
    /// Refit GP hyperparameters by marginal likelihood before each BO call.
    pub gp_tune: bool,
    /// Oldest GP observations are dropped beyond this many.
    pub gp_history: usize,

    pub target_speed: f64,
    pub adversary_vmax: f64,
    pub adversary_radius: f64,
    pub safety_radius: f64,
    pub ignore_safety_radius: bool,
    pub repulsion_margin: f64,
    pub goal_radius: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Compute the Hessian condition number after every replan.
    pub log_kappa: bool,

    /// Trials per radius for the proximity experiment.
    pub trials: usize,
    pub sweep_radius: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        let kind = MapKind::Dense;
        Self {
            map_kind: kind,
            obstacle_count: kind.default_count(),
            radius_range: kind.default_radius_range(),
            weights_config: WeightsPreset::Default,
            smoothness_weight: 1.0,
            collision_weight_default: 10.0,
            collision_weight_conservative: 50.0,
            epsilon: 0.8,
            waypoints: 20,
            solver: SolverConfig::default(),
            policy: AttackPolicy::default(),
            gp_hyper: GpHyper::default(),
            gp_tune: false,
            gp_history: 200,
            target_speed: 1.0,
            adversary_vmax: 1.0,
            adversary_radius: 0.3,
            safety_radius: 0.6,
            ignore_safety_radius: false,
            repulsion_margin: 0.5,
            goal_radius: 0.5,
            dt: 0.5,
            max_steps: 120,
            seed: 0,
            log_kappa: true,
            trials: 10,
            sweep_radius: 1.0,
        }
    }
}

impl TrialConfig {
    pub fn map_spec(&self) -> MapSpec {
        MapSpec::new(self.map_kind, self.obstacle_count, self.radius_range, self.seed)
    }

    pub fn cost_weights(&self) -> CostWeights {
        let collision = match self.weights_config {
            WeightsPreset::Default => self.collision_weight_default,
            WeightsPreset::Conservative => self.collision_weight_conservative,
        };
        CostWeights { smoothness: self.smoothness_weight, collision, epsilon: self.epsilon }
    }

    /// Switches map kind and resets obstacle count and radii to that kind's defaults.
    pub fn with_map_kind(mut self, kind: MapKind) -> Self {
        self.map_kind = kind;
        self.obstacle_count = kind.default_count();
        self.radius_range = kind.default_radius_range();
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.map_spec().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.cost_weights().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.policy.validate().map_err(ConfigError::Invalid)?;
        self.gp_hyper.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.waypoints < 1 {
            return bad("waypoints must be at least 1".into());
        }
        if !(self.target_speed > 0.0 && self.dt > 0.0) {
            return bad("target_speed and dt must be positive".into());
        }
        if !(self.adversary_vmax >= 0.0 && self.adversary_vmax <= self.target_speed) {
            return bad(format!(
                "adversary_vmax {} must lie in [0, target_speed = {}]",
                self.adversary_vmax, self.target_speed
            ));
        }
        if !(self.safety_radius >= 0.0 && self.adversary_radius > 0.0 && self.goal_radius > 0.0) {
            return bad("safety_radius >= 0, adversary_radius > 0 and goal_radius > 0 required".into());
        }
        if !(self.repulsion_margin >= 0.0) {
            return bad("repulsion_margin must be non-negative".into());
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1".into());
        }
        if self.gp_history < 1 {
            return bad("gp_history must be at least 1".into());
        }
        if !(self.sweep_radius > 0.0) {
            return bad("sweep_radius must be positive".into());
        }
        Ok(())
    }

    /// Parses a flat `key = value` file over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line: line_no, key: key.into() });
            }
            cfg.set(key, value).map_err(|e| match e {
                SetError::Unknown => ConfigError::UnknownKey { line: line_no, key: key.into() },
                SetError::Bad(msg) => ConfigError::BadValue { line: line_no, key: key.into(), msg },
            })?;
        }
        // a map kind brings its own obstacle defaults unless they are overridden
        if seen.contains("map_kind") {
            if !seen.contains("obstacle_count") {
                cfg.obstacle_count = cfg.map_kind.default_count();
            }
            let radii = cfg.map_kind.default_radius_range();
            if !seen.contains("radius_min") {
                cfg.radius_range.0 = radii.0;
            }
            if !seen.contains("radius_max") {
                cfg.radius_range.1 = radii.1;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        fn p<T: std::str::FromStr>(v: &str) -> Result<T, SetError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| SetError::Bad(e.to_string()))
        }
        match key {
            "map_kind" => self.map_kind = p(value)?,
            "obstacle_count" => self.obstacle_count = p(value)?,
            "radius_min" => self.radius_range.0 = p(value)?,
            "radius_max" => self.radius_range.1 = p(value)?,
            "weights" | "weights_config" => self.weights_config = p(value)?,
            "w_d" => self.smoothness_weight = p(value)?,
            "w_c_default" => self.collision_weight_default = p(value)?,
            "w_c_conservative" => self.collision_weight_conservative = p(value)?,
            "epsilon" => self.epsilon = p(value)?,
            "waypoints" => self.waypoints = p(value)?,
            "method" => self.solver.method = p::<Method>(value)?,
            "max_iters" => self.solver.max_iters = p(value)?,
            "grad_tol" => self.solver.grad_tol = p(value)?,
            "lbfgs_memory" => self.solver.lbfgs_memory = p(value)?,
            "line_search" => {
                self.solver.line_search = match value.to_ascii_lowercase().as_str() {
                    "backtracking" => LineSearch::Backtracking,
                    other => return Err(SetError::Bad(format!("unknown line search `{other}`"))),
                }
            }
            "armijo_c" => self.solver.armijo_c = p(value)?,
            "backtrack_factor" => self.solver.backtrack_factor = p(value)?,
            "track_inverse_kappa" => self.solver.track_inverse_kappa = p(value)?,
            "policy" => self.policy.kind = p::<PolicyKind>(value)?,
            "r_min" => self.policy.r_bounds.0 = p(value)?,
            "r_max" => self.policy.r_bounds.1 = p(value)?,
            "bo_iters" => self.policy.bo_iters = p(value)?,
            "ei_xi" => self.policy.ei_xi = p(value)?,
            "gp_length_theta" => self.gp_hyper.length_scale[0] = p(value)?,
            "gp_length_r" => self.gp_hyper.length_scale[1] = p(value)?,
            "gp_signal_variance" => self.gp_hyper.signal_variance = p(value)?,
            "gp_noise_variance" => self.gp_hyper.noise_variance = p(value)?,
            "gp_tune" => self.gp_tune = p(value)?,
            "gp_history" => self.gp_history = p(value)?,
            "target_speed" => self.target_speed = p(value)?,
            "adversary_vmax" => self.adversary_vmax = p(value)?,
            "adversary_radius" => self.adversary_radius = p(value)?,
            "safety_radius" => self.safety_radius = p(value)?,
            "ignore_safety_radius" => self.ignore_safety_radius = p(value)?,
            "repulsion_margin" => self.repulsion_margin = p(value)?,
            "goal_radius" => self.goal_radius = p(value)?,
            "dt" => self.dt = p(value)?,
            "max_steps" => self.max_steps = p(value)?,
            "seed" => self.seed = p(value)?,
            "log_kappa" => self.log_kappa = p(value)?,
            "trials" => self.trials = p(value)?,
            "sweep_radius" => self.sweep_radius = p(value)?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }
}

enum SetError {
    Unknown,
    Bad(String),
}
