use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use advplan::adversary::{AttackConfig, GpModel, PolicyKind};
use advplan::diagnostics::{obstacle_sweep, sweep_csv, SweepSetup};
use advplan::env::EnvError;
use advplan::harness::output::{self, write_output};
use advplan::harness::{proximity_experiment, run_batch, run_trial, ConfigError, OutputError, TrialConfig};

/// Adversarial stress tests for an optimization-based trajectory planner.
#[derive(Parser)]
#[command(name = "advplan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its per-step log.
    Trial {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run seeded trials and write the summary and per-trial tables.
    Batch {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `trials` from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// First seed; trials use consecutive seeds from here.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Place one obstacle at every grid cell of a corridor problem and solve.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pin the attack distance to each radius and compare iteration counts.
    Proximity {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one Bayesian-optimization trial and dump the surrogate's data.
    GpDump {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Io(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<EnvError> for Failure {
    fn from(e: EnvError) -> Self {
        match e {
            // an obstacle layout that cannot be packed is a configuration problem
            EnvError::GenerationFailure(_) | EnvError::InvalidSpec(_) => Failure::Config(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<TrialConfig, Failure> {
    let Some(path) = path else { return Ok(TrialConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    TrialConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Trial { config, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let record = run_trial(&cfg)?;
            println!("seed {}: {} after {} steps", record.seed, record.outcome, record.steps);
            report(&write_output(&out, "steps.csv", &output::steps_csv(&record))?);
        }
        Command::Batch { config, trials, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let n = trials.unwrap_or(cfg.trials);
            if n == 0 {
                return Err(Failure::Config("a batch needs at least one trial".into()));
            }
            let (summary, records) = run_batch(&cfg, n, seed.unwrap_or(cfg.seed))?;
            println!(
                "{} / {}: success {:.2}, coll_m {:.2}, coll_a {:.2}, timeout {:.2}",
                summary.policy,
                summary.weights,
                summary.success.mean,
                summary.collm.mean,
                summary.colla.mean,
                summary.timeout.mean
            );
            report(&write_output(&out, "summary.csv", &output::summary_csv(&[summary]))?);
            report(&write_output(&out, "trials.csv", &output::trials_csv(&records))?);
        }
        Command::Sweep { config, grid, out } => {
            let cfg = load_config(config.as_deref())?;
            if grid < 2 {
                return Err(Failure::Config("sweep grid needs at least 2 cells per side".into()));
            }
            let setup = SweepSetup::corridor(cfg.cost_weights(), cfg.waypoints, cfg.sweep_radius, grid);
            let cells = obstacle_sweep(&setup, &cfg.solver);
            let failures = cells.iter().filter(|c| c.outcome == advplan::diagnostics::SweepOutcome::Failure).count();
            println!("{} cells, {failures} failures", cells.len());
            report(&write_output(&out, "sweep.csv", &sweep_csv(&cells))?);
        }
        Command::Proximity { config, radii, trials, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            if radii.iter().any(|r| r.is_nan() || *r <= 0.0) || radii.windows(2).any(|w| w[0] > w[1]) {
                return Err(Failure::Config("radii must be positive and sorted ascending".into()));
            }
            if cfg.policy.kind == PolicyKind::None {
                return Err(Failure::Config("proximity needs an attacking policy".into()));
            }
            let n = trials.unwrap_or(cfg.trials);
            if n == 0 {
                return Err(Failure::Config("proximity needs at least one trial per radius".into()));
            }
            let first = seed.unwrap_or(cfg.seed);
            let rows = proximity_experiment(&cfg, &radii, n, first)?;
            let baseline_cfg = TrialConfig { policy: advplan::adversary::AttackPolicy { kind: PolicyKind::None, ..cfg.policy }, ..cfg };
            let (baseline, _) = run_batch(&baseline_cfg, n, first)?;
            for r in &rows {
                println!(
                    "radius {}: mean max iterations {:.1} (baseline {:.1})",
                    r.radius, r.summary.max_iters.mean, baseline.max_iters.mean
                );
            }
            report(&write_output(&out, "proximity.csv", &output::proximity_csv(&rows))?);
            report(&write_output(&out, "baseline.csv", &output::summary_csv(&[baseline]))?);
        }
        Command::GpDump { config, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.policy.kind = PolicyKind::BayesOpt;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let record = run_trial(&cfg)?;
            println!("seed {}: {} after {} steps, {} observations", record.seed, record.outcome, record.steps, record.gp_observations.len());
            report(&write_output(&out, "gp_data.csv", &output::gp_csv(&record.gp_observations))?);
            if !record.gp_observations.is_empty() {
                let model = GpModel::fit(record.gp_observations, cfg.gp_hyper)
                    .map_err(|e| Failure::Numerical(format!("surrogate fit failed: {e}")))?;
                report(&write_output(&out, "gp_mean.csv", &gp_mean_csv(&model, cfg.policy.r_bounds))?);
            }
        }
    }
    Ok(())
}

/// Posterior mean and variance on a regular (theta, r) grid.
fn gp_mean_csv(model: &GpModel, r_bounds: (f64, f64)) -> String {
    use std::f64::consts::PI;
    const THETA_CELLS: usize = 72;
    const R_CELLS: usize = 24;
    let mut s = String::from("theta,r,mean,variance\n");
    for i in 0..=THETA_CELLS {
        let theta = -PI + 2.0 * PI * i as f64 / THETA_CELLS as f64;
        for j in 0..=R_CELLS {
            let r = r_bounds.0 + (r_bounds.1 - r_bounds.0) * j as f64 / R_CELLS as f64;
            let (mean, var) = model.predict(&AttackConfig::new(theta, r));
            s.push_str(&format!("{theta},{r},{mean},{var}\n"));
        }
    }
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
