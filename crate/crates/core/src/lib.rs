//! Iterative trajectory planning under adversarial pressure.
//!
//! A waypoint planner minimizes `w_d * smoothness + w_c * collision` over a map
//! of circular obstacles. An adversary that appears in the planner's map as one
//! more obstacle tries to place itself where the planner's problem becomes badly
//! conditioned, either by Bayesian optimization over a GP surrogate of the
//! target's heading deviation or by a closed-form heading-lead heuristic.
//!
//! Modules, bottom-up:
//! - [`env`]: obstacles, exact signed distance, map generation
//! - [`planner`]: trajectories and the cost model
//! - [`solver`]: GD, BFGS and L-BFGS with per-iterate history
//! - [`diagnostics`]: Jacobi eigenvalues, condition numbers, obstacle sweeps
//! - [`adversary`]: GP, expected improvement, attack policies, adversary motion
//! - [`harness`]: trials, batches, CSV output

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod diagnostics;
pub mod env;
pub mod harness;
pub mod planner;
pub mod solver;

pub use env::Point;
