//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use advplan::adversary::*;
use advplan::diagnostics::*;
use advplan::env::{MapKind, Point};
use advplan::harness::*;
use advplan::planner::{CostModel, CostWeights, Trajectory};
use advplan::solver::*;
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

#[test]
fn criterion_01_gradient_matches_finite_differences() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let model = CostModel::new(CostWeights::default(), random_map(&mut rng, 10));
        let t = random_trajectory(&mut rng, 20);
        if near_medial_axis(&model.map, &t, 1e-3) {
            continue;
        }
        worst = worst.max(gradient_rel_error(&model, &t));
        checked += 1;
    }
    let elapsed = clock.elapsed();
    verdict(
        1,
        "gradient",
        worst <= 1e-4 && elapsed < Duration::from_secs(10),
        format!("worst relative error {worst:.2e} over {checked} problems in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_eigensolver_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = random_symmetric(&mut rng, 40);
        let ours = eigen_symmetric(&m).unwrap();
        for (a, b) in ours.iter().zip(qr_eigenvalues(&m)) {
            worst = worst.max((a - b).abs());
        }
    }
    let k_id = condition_number(&DMatrix::identity(6, 6)).unwrap().condition_number;
    let k_diag = condition_number(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0]))).unwrap().condition_number;
    verdict(
        2,
        "eigensolver",
        worst <= 1e-8 && k_id == 1.0 && k_diag == 10.0,
        format!("max eigenvalue gap {worst:.2e}; kappa(I) = {k_id}, kappa(diag(1,10)) = {k_diag}"),
    );
}

#[test]
fn criterion_03_conditioning_slows_gradient_descent() {
    let clock = Instant::now();
    let iterations: Vec<usize> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&kappa| {
            let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, kappa]));
            let objective = move |x: &DVector<f64>| {
                let ax = &a * x;
                (0.5 * x.dot(&ax), ax)
            };
            let cfg = SolverConfig { max_iters: 1_000_000, grad_tol: 1e-6, ..SolverConfig::with_method(Method::GradientDescent) };
            let r = minimize_objective(&objective, DVector::from_vec(vec![1.0, 1.0]), &cfg).unwrap();
            if r.converged { r.iterations } else { usize::MAX }
        })
        .collect();
    let elapsed = clock.elapsed();
    verdict(
        3,
        "gd conditioning",
        iterations[0] < iterations[1] && iterations[1] < iterations[2] && elapsed < Duration::from_secs(1),
        format!("iterations {iterations:?} for kappa 10, 100, 1000 in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_04_gp_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exact = GpHyper { noise_variance: 0.0, ..GpHyper::default() };
    let mut interp = 0.0f64;
    let mut oracle = 0.0f64;
    for _ in 0..20 {
        let data: Vec<Observation> = (0..5)
            .map(|_| Observation {
                config: AttackConfig::new(rng.gen_range(-PI..PI), rng.gen_range(0.5..5.0)),
                deviation: rng.gen_range(0.0..PI),
            })
            .collect();
        let model = GpModel::fit(data.clone(), exact).unwrap();
        for o in &data {
            interp = interp.max((model.predict(&o.config).0 - o.deviation).abs());
        }
        let h = GpHyper::default();
        let model = GpModel::fit(data.clone(), h).unwrap();
        let gram = DMatrix::from_fn(5, 5, |i, j| h.kernel(&data[i].config, &data[j].config)) + DMatrix::identity(5, 5) * h.noise_variance;
        let y = DVector::from_fn(5, |i, _| data[i].deviation);
        let lu = gram.lu();
        for _ in 0..10 {
            let x = AttackConfig::new(rng.gen_range(-PI..PI), rng.gen_range(0.5..5.0));
            let k = DVector::from_fn(5, |i, _| h.kernel(&data[i].config, &x));
            let mean = k.dot(&lu.solve(&y).unwrap());
            let var = (h.signal_variance - k.dot(&lu.solve(&k).unwrap())).max(0.0);
            let (m, v) = model.predict(&x);
            oracle = oracle.max((m - mean).abs()).max((v - var).abs());
        }
    }
    verdict(
        4,
        "gp exactness",
        interp <= 1e-8 && oracle <= 1e-8,
        format!("interpolation error {interp:.2e}, oracle gap {oracle:.2e}"),
    );
}

#[test]
fn criterion_05_bayes_opt_finds_peak() {
    let clock = Instant::now();
    let bump = |c: AttackConfig| (-(c.theta - 1.0).powi(2) - (c.r - 2.0).powi(2)).exp();
    let policy = AttackPolicy { kind: PolicyKind::BayesOpt, r_bounds: (1.0, 3.0), bo_iters: 20, ..AttackPolicy::default() };
    let distances: Vec<f64> = (0..10u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let best = bayes_opt_attack(&[], GpHyper::default(), &policy, &mut rng, bump).unwrap().best;
            (best.theta - 1.0).abs().max((best.r - 2.0).abs())
        })
        .collect();
    let hits = distances.iter().filter(|d| **d <= 0.2).count();
    let elapsed = clock.elapsed();
    verdict(
        5,
        "bayes opt",
        hits >= 9 && elapsed < Duration::from_secs(5),
        format!("{hits}/10 seeds within 0.2 (worst {:.3}) in {elapsed:.2?}", distances.iter().cloned().fold(0.0, f64::max)),
    );
}

#[test]
fn criterion_06_heuristic_formula() {
    let p = AttackPolicy::default();
    let turned = heuristic_attack(0.0, FRAC_PI_2, 1.0, &p).theta;
    let straight = heuristic_attack(1.3, 0.0, 1.0, &p).theta;
    verdict(
        6,
        "heuristic",
        (turned - FRAC_PI_4).abs() < 1e-15 && straight == 1.3,
        format!("turn case {turned}, zero-rate case {straight}"),
    );
}

#[test]
fn criterion_07_obstacle_sweep() {
    let clock = Instant::now();
    let setup = SweepSetup::corridor(CostWeights::default(), 20, 1.0, 40);
    let cells = obstacle_sweep(&setup, &SolverConfig::default());
    let free = trajectory_kappa(&setup.base, &Trajectory::straight_line(setup.start, setup.goal, 20).unwrap());
    let failures = cells.iter().filter(|c| c.outcome == SweepOutcome::Failure).count();
    let clear_of_endpoints = |c: &Point| (c - setup.start).norm() > 1.0 && (c - setup.goal).norm() > 1.0;
    let interior = cells
        .iter()
        .filter(|c| c.outcome == SweepOutcome::Failure && clear_of_endpoints(&c.obstacle_position))
        .count();
    let mut iters: Vec<usize> = cells.iter().map(|c| c.iterations).collect();
    iters.sort_unstable();
    let median = iters[iters.len() / 2] as f64;
    let max_iters = *iters.last().unwrap() as f64;
    let max_kappa = cells.iter().map(|c| c.condition_number).fold(0.0, f64::max);
    let elapsed = clock.elapsed();
    verdict(
        7,
        "obstacle sweep",
        failures >= 1 && max_iters >= 2.0 * median && max_kappa >= 10.0 * free && elapsed < Duration::from_secs(300),
        format!(
            "{failures} failures ({interior} clear of the endpoints), iterations max {max_iters} / median {median}, kappa max {max_kappa:.3e} / free {free:.3e}, {elapsed:.2?}"
        ),
    );
}

fn arm(template: &TrialConfig, edit: impl FnOnce(&mut TrialConfig)) -> BatchSummary {
    let mut cfg = TrialConfig { log_kappa: false, ..template.clone() };
    edit(&mut cfg);
    run_batch(&cfg, 100, 0).unwrap().0
}

#[test]
fn criterion_08_outcome_rates() {
    let clock = Instant::now();
    let base = TrialConfig::default().with_map_kind(MapKind::Dense);
    let none = arm(&base, |c| c.policy.kind = PolicyKind::None);
    let heur = arm(&base, |c| c.policy.kind = PolicyKind::Heuristic);
    let conservative = arm(&base, |c| {
        c.policy.kind = PolicyKind::Heuristic;
        c.weights_config = WeightsPreset::Conservative;
    });
    let random = arm(&base, |c| c.policy.kind = PolicyKind::RandomLine);
    let ignore = arm(&base, |c| {
        c.policy.kind = PolicyKind::Heuristic;
        c.ignore_safety_radius = true;
    });
    let arms = [&none, &heur, &conservative, &random, &ignore];
    let highest_colla = arms[..4].iter().all(|a| ignore.colla.mean > a.colla.mean);
    let drop = none.success.mean - heur.success.mean;
    let elapsed = clock.elapsed();
    let pass = drop >= 0.30
        && conservative.success.mean > heur.success.mean
        && random.success.mean >= 0.75
        && random.success.mean > heur.success.mean
        && highest_colla
        && elapsed < Duration::from_secs(1800);
    verdict(
        8,
        "outcome rates",
        pass,
        format!(
            "success none {:.2}, heuristic {:.2}, conservative {:.2}, random {:.2}; coll_a ignore {:.2} vs max other {:.2}; {elapsed:.1?}",
            none.success.mean,
            heur.success.mean,
            conservative.success.mean,
            random.success.mean,
            ignore.colla.mean,
            arms[..4].iter().map(|a| a.colla.mean).fold(0.0, f64::max)
        ),
    );
}

#[test]
fn criterion_09_iteration_inflation() {
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in [MapKind::Sparse, MapKind::Dense] {
        for method in [Method::Bfgs, Method::Lbfgs] {
            let base = TrialConfig::default().with_map_kind(kind);
            let edit = |c: &mut TrialConfig, p: PolicyKind| {
                c.solver.method = method;
                c.policy.kind = p;
            };
            let quiet = arm(&base, |c| edit(c, PolicyKind::None)).max_iters;
            let attacked = arm(&base, |c| edit(c, PolicyKind::Heuristic)).max_iters;
            let se = quiet.se.hypot(attacked.se);
            let z = (attacked.mean - quiet.mean) / se;
            pass &= z >= 2.0;
            lines.push(format!("{kind:?}/{method:?} {:.1} vs {:.1} ({z:.1} se)", attacked.mean, quiet.mean));
        }
    }
    verdict(9, "iteration inflation", pass, lines.join("; "));
}

#[test]
fn criterion_10_proximity() {
    let mut cfg = TrialConfig { log_kappa: false, ..TrialConfig::default() };
    cfg.policy.kind = PolicyKind::Heuristic;
    let rows = proximity_experiment(&cfg, &[2.0, 4.0, 6.0], 10, 0).unwrap();
    cfg.policy.kind = PolicyKind::None;
    let (baseline, _) = run_batch(&cfg, 10, 0).unwrap();
    let pass = rows.iter().all(|r| r.summary.max_iters.mean > baseline.max_iters.mean);
    let detail = rows
        .iter()
        .map(|r| format!("r={} {:.1}", r.radius, r.summary.max_iters.mean))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(10, "proximity", pass, format!("{detail} vs baseline {:.1}", baseline.max_iters.mean));
}

fn run_cli(args: &[&str], config: &Path, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_advplan"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn criterion_11_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "policy = heuristic\nmax_steps = 40\nseed = 5\n").unwrap();
    let commands: [&[&str]; 5] = [
        &["trial"],
        &["batch", "--trials", "4"],
        &["sweep", "--grid", "6"],
        &["proximity", "--radii", "2,4", "--trials", "2"],
        &["gp-dump", "--seed", "2"],
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        run_cli(args, &config, &a);
        run_cli(args, &config, &b);
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            compared += 1;
            if std::fs::read(a.join(&name)).unwrap() != std::fs::read(b.join(&name)).unwrap() {
                mismatched.push(format!("{}/{}", args[0], name.to_string_lossy()));
            }
        }
    }
    verdict(
        11,
        "cli determinism",
        mismatched.is_empty() && compared >= 7,
        format!("{compared} files compared across {} subcommands, mismatches {mismatched:?}", commands.len()),
    );
}

