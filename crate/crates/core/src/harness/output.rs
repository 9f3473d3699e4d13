//! CSV emission. Floats use Rust's shortest round-trip formatting, so output is
//! byte-stable for identical inputs and parses back to the same values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::batch::{BatchSummary, ProximityRow};
use super::trial::TrialRecord;
use crate::adversary::Observation;

pub const STEP_HEADER: &str = "step,iterations,kappa_max,replan_failed,tx,ty,ax,ay,inverse_kappa";
pub const SUMMARY_HEADER: &str =
    "policy,weights,n,success,collm,colla,timeout,mean_avg_iters,se_avg_iters,mean_max_iters,se_max_iters";
pub const TRIAL_HEADER: &str = "seed,outcome,steps,avg_iters,max_iters,kappa_max";
pub const PROXIMITY_HEADER: &str = "radius,n,mean_avg_iters,se_avg_iters,mean_max_iters,se_max_iters";
pub const GP_HEADER: &str = "theta,r,deviation";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn steps_csv(record: &TrialRecord) -> String {
    let mut s = format!("{STEP_HEADER}\n");
    for (i, st) in record.per_step.iter().enumerate() {
        let (ax, ay) = st.adversary_pos.map_or((String::new(), String::new()), |a| (a.x.to_string(), a.y.to_string()));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            st.iterations,
            st.kappa_max,
            st.replan_failed,
            st.target_pos.x,
            st.target_pos.y,
            ax,
            ay,
            st.inverse_kappa
        );
    }
    s
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut s = format!("{TRIAL_HEADER}\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.seed, r.outcome, r.steps, r.avg_iters(), r.max_iters(), r.kappa_max());
    }
    s
}

pub fn summary_csv(summaries: &[BatchSummary]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for b in summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            b.policy,
            b.weights,
            b.n_trials,
            b.success.mean,
            b.collm.mean,
            b.colla.mean,
            b.timeout.mean,
            b.avg_iters.mean,
            b.avg_iters.se,
            b.max_iters.mean,
            b.max_iters.se
        );
    }
    s
}

pub fn proximity_csv(rows: &[ProximityRow]) -> String {
    let mut s = format!("{PROXIMITY_HEADER}\n");
    for r in rows {
        let b = &r.summary;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.radius, b.n_trials, b.avg_iters.mean, b.avg_iters.se, b.max_iters.mean, b.max_iters.se
        );
    }
    s
}

pub fn gp_csv(observations: &[Observation]) -> String {
    let mut s = format!("{GP_HEADER}\n");
    for o in observations {
        let _ = writeln!(s, "{},{},{}", o.config.theta, o.config.r, o.deviation);
    }
    s
}

/// One parsed row of a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: String,
    pub weights: String,
    pub n: usize,
    /// success, collm, colla, timeout, mean_avg_iters, se_avg_iters, mean_max_iters, se_max_iters
    pub values: [f64; 8],
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, OutputError> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(OutputError::Parse { line: 1, msg: "unexpected header".into() });
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let err = |msg: String| OutputError::Parse { line: i + 2, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(err(format!("expected 11 fields, got {}", f.len())));
            }
            let mut values = [0.0; 8];
            for (v, s) in values.iter_mut().zip(&f[3..]) {
                *v = s.parse().map_err(|e| err(format!("`{s}`: {e}")))?;
            }
            Ok(SummaryRow {
                policy: f[0].to_string(),
                weights: f[1].to_string(),
                n: f[2].parse().map_err(|e| err(format!("`{}`: {e}", f[2])))?,
                values,
            })
        })
        .collect()
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| OutputError::Io { path: path.clone(), source })?;
    Ok(path)
}
