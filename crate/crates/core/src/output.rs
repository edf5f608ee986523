//! Batch execution and CSV/JSON result files.
//!
//! Layout under the output directory, one subdirectory per arm:
//! `trial_NNNN.csv`, `aggregate.csv`, `summary.json`, `config.resolved.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::simulation::{compute_metrics, run_trial, MetricTable, TrialResult};

pub const VERSION: &str = concat!("infoseek ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub arm: String,
    pub mode: String,
    pub n_sensors: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub perfect_finish_rate: f64,
    pub mean_final_median_dist: f64,
    pub mean_final_est_err: f64,
    /// Share of trials where some sensor ends within `epsilon0` of the true source.
    pub goal_rate: f64,
    /// Share of trials whose estimate-based termination test fired.
    pub terminated_rate: f64,
    pub version: &'static str,
    pub config: ExperimentConfig,
}

pub struct BatchOutput {
    pub results: Vec<TrialResult>,
    pub metrics: MetricTable,
    pub summary: Summary,
}

/// Runs all trials of one config; results come back in trial order.
pub fn run_trials(cfg: &ExperimentConfig, parallel: Option<usize>) -> Result<Vec<TrialResult>> {
    let work = || (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<Vec<_>>>();
    match parallel {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

pub fn summarize(cfg: &ExperimentConfig, results: &[TrialResult], metrics: &MetricTable) -> Summary {
    let n = results.len() as f64;
    Summary {
        scenario: cfg.scenario.clone(),
        arm: cfg.arm.clone(),
        mode: cfg.mode.label().to_string(),
        n_sensors: cfg.n_sensors,
        trials: results.len(),
        success_rate: metrics.success_rate,
        perfect_finish_rate: metrics.perfect_finish_rate,
        mean_final_median_dist: metrics.mean_final_median_dist,
        mean_final_est_err: metrics.mean_final_est_err,
        goal_rate: results.iter().filter(|r| r.goal_reached(cfg.epsilon0)).count() as f64 / n,
        terminated_rate: results.iter().filter(|r| r.terminated_at.is_some()).count() as f64 / n,
        version: VERSION,
        config: cfg.clone(),
    }
}

pub fn run_batch(cfg: &ExperimentConfig, out_dir: Option<&Path>, parallel: Option<usize>) -> Result<BatchOutput> {
    let results = run_trials(cfg, parallel)?;
    let metrics = compute_metrics(&results, cfg.reach_threshold);
    let summary = summarize(cfg, &results, &metrics);
    if let Some(dir) = out_dir {
        write_outputs(dir, cfg, &results, &metrics, &summary)?;
    }
    Ok(BatchOutput { results, metrics, summary })
}

fn fmt(v: f64) -> String {
    // shortest round-trip form keeps files exact and byte-stable
    format!("{v}")
}

pub fn trial_csv(result: &TrialResult) -> String {
    let k = result.records[0].source.len();
    let mut out = String::from("tick,agent_id,px,py");
    if k == 3 {
        out.push_str(",pz");
    }
    out.push_str(",qhat_x,qhat_y");
    if k == 3 {
        out.push_str(",qhat_z");
    }
    out.push_str(",loss,src_dist,est_err,terminated\n");
    for t in 0..=result.max_ticks.max(result.records.len() - 1) {
        let rec = result.padded(t);
        for (i, (p, q)) in rec.positions.iter().zip(&rec.estimates).enumerate() {
            let _ = write!(out, "{},{}", t, i);
            for v in p.iter().chain(q.iter()) {
                let _ = write!(out, ",{}", fmt(*v));
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                fmt(rec.losses[i]),
                fmt((p - &rec.source).norm()),
                fmt((q - &rec.source).norm()),
                u8::from(rec.terminated)
            );
        }
    }
    out
}

pub fn aggregate_csv(metrics: &MetricTable) -> String {
    let mut out = String::from(
        "tick,median_dist_mean,median_dist_std,est_err_mean,est_err_std,max_dist_mean,max_dist_std,min_dist_mean,min_dist_std,terminated_frac\n",
    );
    for s in &metrics.per_tick {
        let cols = [
            s.median_dist.mean,
            s.median_dist.std,
            s.median_est_err.mean,
            s.median_est_err.std,
            s.max_dist.mean,
            s.max_dist.std,
            s.min_dist.mean,
            s.min_dist.std,
            s.terminated_frac,
        ];
        let _ = write!(out, "{}", s.tick);
        for c in cols {
            let _ = write!(out, ",{}", fmt(c));
        }
        out.push('\n');
    }
    out
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    results: &[TrialResult],
    metrics: &MetricTable,
    summary: &Summary,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in results {
        write(dir.join(format!("trial_{:04}.csv", r.trial)), &trial_csv(r))?;
    }
    write(dir.join("aggregate.csv"), &aggregate_csv(metrics))?;
    write(dir.join("summary.json"), &(to_json(summary)? + "\n"))?;
    write(dir.join("config.resolved.json"), &(to_json(cfg)? + "\n"))?;
    Ok(())
}

/// Output directory of one arm: `<root>/<scenario>/<arm>`.
pub fn arm_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(&cfg.scenario).join(&cfg.arm)
}
