use serde::Serialize;

use super::TrialResult;

/// Median with the even-length convention of averaging the middle pair.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Mean and population standard deviation across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickStats {
    pub tick: usize,
    pub median_dist: Stat,
    pub median_est_err: Stat,
    pub max_dist: Stat,
    pub min_dist: Stat,
    pub terminated_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTable {
    pub per_tick: Vec<TickStats>,
    /// At least one sensor within the reach threshold of the true source at the final tick.
    pub success_rate: f64,
    /// Every sensor within the reach threshold at the final tick.
    pub perfect_finish_rate: f64,
    pub mean_final_median_dist: f64,
    pub mean_final_est_err: f64,
}

/// Cross-trial statistics; shorter trials are padded with their final state.
pub fn compute_metrics(results: &[TrialResult], reach_threshold: f64) -> MetricTable {
    assert!(!results.is_empty(), "compute_metrics needs at least one trial");
    let horizon = results.iter().map(|r| r.max_ticks.max(r.records.len() - 1)).max().unwrap_or(0);
    let per_tick = (0..=horizon)
        .map(|t| {
            let recs: Vec<_> = results.iter().map(|r| r.padded(t)).collect();
            let collect = |f: &dyn Fn(&super::TickRecord) -> f64| recs.iter().map(f).collect::<Vec<_>>();
            TickStats {
                tick: t,
                median_dist: Stat::of(&collect(&|r| r.median_distance())),
                median_est_err: Stat::of(&collect(&|r| r.median_estimate_error())),
                max_dist: Stat::of(&collect(&|r| r.max_distance())),
                min_dist: Stat::of(&collect(&|r| r.min_distance())),
                terminated_frac: recs.iter().filter(|r| r.terminated).count() as f64 / recs.len() as f64,
            }
        })
        .collect();
    let n = results.len() as f64;
    let finals: Vec<_> = results.iter().map(|r| r.final_record()).collect();
    let success = finals.iter().filter(|r| r.min_distance() < reach_threshold).count() as f64;
    let perfect = finals.iter().filter(|r| r.max_distance() < reach_threshold).count() as f64;
    MetricTable {
        per_tick,
        success_rate: success / n,
        perfect_finish_rate: perfect / n,
        mean_final_median_dist: finals.iter().map(|r| r.median_distance()).sum::<f64>() / n,
        mean_final_est_err: finals.iter().map(|r| r.median_estimate_error()).sum::<f64>() / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::Position;
    use crate::simulation::TickRecord;

    fn trial(distances: &[f64]) -> TrialResult {
        let rec = TickRecord {
            tick: 0,
            source: Position::from_vec(vec![0.0, 0.0]),
            positions: distances.iter().map(|d| Position::from_vec(vec![*d, 0.0])).collect(),
            estimates: vec![Position::from_vec(vec![0.0, 0.1]); distances.len()],
            losses: vec![0.0; distances.len()],
            true_loss: 0.0,
            bound: None,
            terminated: false,
        };
        TrialResult { trial: 0, seed: 0, max_ticks: 0, records: vec![rec], terminated_at: None }
    }

    #[test]
    fn all_close_is_perfect_finish() {
        let t = compute_metrics(&[trial(&[0.1, 0.1, 0.1])], 0.2);
        assert_eq!(t.success_rate, 1.0);
        assert_eq!(t.perfect_finish_rate, 1.0);
    }

    #[test]
    fn one_of_five_is_success_only() {
        let t = compute_metrics(&[trial(&[0.1, 1.0, 2.0, 3.0, 4.0])], 0.2);
        assert_eq!(t.success_rate, 1.0);
        assert_eq!(t.perfect_finish_rate, 0.0);
        assert_eq!(t.mean_final_median_dist, 2.0);
    }

    #[test]
    fn population_std() {
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
