//! Seeded batches of trials and their summary statistics.

use super::config::TrialConfig;
use super::trial::{run_trial, Outcome, TrialRecord};
use crate::adversary::PolicyKind;
use crate::env::EnvError;

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, se: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self { mean, se: (var / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub policy: PolicyKind,
    pub weights: String,
    pub n_trials: usize,
    pub success: Estimate,
    pub collm: Estimate,
    pub colla: Estimate,
    pub timeout: Estimate,
    pub avg_iters: Estimate,
    pub max_iters: Estimate,
}

impl BatchSummary {
    pub fn rate(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Success => self.success.mean,
            Outcome::CollM => self.collm.mean,
            Outcome::CollA => self.colla.mean,
            Outcome::Timeout => self.timeout.mean,
        }
    }

    /// Summary statistics over `records`, which are sorted by seed first.
    pub fn from_records(cfg: &TrialConfig, records: &[TrialRecord]) -> Self {
        let mut sorted: Vec<&TrialRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.seed);
        let indicator = |o: Outcome| -> Estimate {
            let v: Vec<f64> = sorted.iter().map(|r| if r.outcome == o { 1.0 } else { 0.0 }).collect();
            Estimate::of(&v)
        };
        let avg: Vec<f64> = sorted.iter().map(|r| r.avg_iters()).collect();
        let max: Vec<f64> = sorted.iter().map(|r| r.max_iters() as f64).collect();
        Self {
            policy: cfg.policy.kind,
            weights: cfg.weights_config.to_string(),
            n_trials: sorted.len(),
            success: indicator(Outcome::Success),
            collm: indicator(Outcome::CollM),
            colla: indicator(Outcome::CollA),
            timeout: indicator(Outcome::Timeout),
            avg_iters: Estimate::of(&avg),
            max_iters: Estimate::of(&max),
        }
    }
}

/// Runs trials with seeds `first_seed .. first_seed + n`, sorted by seed.
pub fn run_trials(template: &TrialConfig, n: usize, first_seed: u64) -> Result<Vec<TrialRecord>, EnvError> {
    let configs: Vec<TrialConfig> =
        (0..n as u64).map(|i| TrialConfig { seed: first_seed.wrapping_add(i), ..template.clone() }).collect();
    #[cfg(feature = "parallel")]
    let records: Result<Vec<_>, _> = {
        use rayon::prelude::*;
        configs.par_iter().map(run_trial).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Result<Vec<_>, _> = configs.iter().map(run_trial).collect();
    let mut records = records?;
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

pub fn run_batch(template: &TrialConfig, n: usize, first_seed: u64) -> Result<(BatchSummary, Vec<TrialRecord>), EnvError> {
    assert!(n >= 1, "a batch needs at least one trial");
    let records = run_trials(template, n, first_seed)?;
    Ok((BatchSummary::from_records(template, &records), records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityRow {
    pub radius: f64,
    pub summary: BatchSummary,
}

/// One batch per radius with the attack radius pinned to it.
pub fn proximity_experiment(
    template: &TrialConfig,
    radii: &[f64],
    n: usize,
    first_seed: u64,
) -> Result<Vec<ProximityRow>, EnvError> {
    assert!(radii.iter().all(|r| *r > 0.0), "radii must be positive");
    assert!(radii.windows(2).all(|w| w[0] <= w[1]), "radii must be sorted ascending");
    radii
        .iter()
        .map(|&radius| {
            let mut cfg = template.clone();
            cfg.policy.r_bounds = (radius, radius);
            let (summary, _) = run_batch(&cfg, n, first_seed)?;
            Ok(ProximityRow { radius, summary })
        })
        .collect()
}
