//! Waypoint planning by gradient descent on an information loss.
//!
//! Every planner returns the full receding-horizon waypoint sequence
//! `p(1..=T)`; the simulator executes only the first one. Per-sensor
//! displacements are clipped to `max_step_norm` and shortened so no sensor
//! steps closer than `r_min_guard` to the estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::information::{self, gradient_weight, weighted_sensor_gradient, LossMetric};
use crate::measurement::{MeasurementModel, Position};

pub const DEFAULT_STEP_SIZE: f64 = 0.05;
pub const DEFAULT_MAX_STEP_NORM: f64 = 0.1;
pub const DEFAULT_R_MIN_GUARD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One central EKF and a joint gradient step over all sensors.
    Centralized,
    /// Consensus EKF plus FIM consensus with a shared loss.
    DistributedConsensus,
    /// Consensus EKF, neighborhood-local loss.
    VariationI,
    /// Local EKF, neighborhood-local loss.
    VariationII,
    /// Central EKF, every sensor heads straight for the estimate.
    StraightLine,
    /// Central EKF, sensors never move.
    Stationary,
}

impl Mode {
    pub fn is_distributed(self) -> bool {
        matches!(self, Mode::DistributedConsensus | Mode::VariationI | Mode::VariationII)
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::DistributedConsensus => "distributed_consensus",
            Mode::VariationI => "variation_i",
            Mode::VariationII => "variation_ii",
            Mode::StraightLine => "straight_line",
            Mode::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub step_size: f64,
    pub horizon: usize,
    pub max_step_norm: f64,
    pub metric: LossMetric,
    pub mode: Mode,
    pub delta: f64,
    pub r_min_guard: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            step_size: DEFAULT_STEP_SIZE,
            horizon: 1,
            max_step_norm: DEFAULT_MAX_STEP_NORM,
            metric: LossMetric::TraceInv,
            mode: Mode::Centralized,
            delta: information::DEFAULT_DELTA,
            r_min_guard: DEFAULT_R_MIN_GUARD,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || self.horizon == 0 || !(self.max_step_norm > 0.0) {
            return Err(Error::Config(
                "planner needs step_size > 0, horizon >= 1 and max_step_norm > 0".into(),
            ));
        }
        if !(self.delta >= 0.0) || !(self.r_min_guard >= 0.0) {
            return Err(Error::Config("delta and r_min_guard must be non-negative".into()));
        }
        Ok(())
    }
}

/// Scales `d` down to norm `max` if it is longer.
pub fn clip(d: DVector<f64>, max: f64) -> DVector<f64> {
    let n = d.norm();
    if n > max {
        d * (max / n)
    } else {
        d
    }
}

/// Shortens `step` so the segment from `p` stops where it would first enter
/// the ball of radius `guard` around `center`.
///
/// A sensor already inside the ball may only move outward.
pub fn guard_step(p: &Position, step: DVector<f64>, center: &Position, guard: f64) -> DVector<f64> {
    let rel = p - center;
    if rel.norm() < guard {
        let outward = rel.dot(&step) >= 0.0;
        return if outward { step } else { DVector::zeros(step.len()) };
    }
    let a = step.norm_squared();
    if a == 0.0 {
        return step;
    }
    // first root of |rel + s step| = guard
    let b = 2.0 * rel.dot(&step);
    let c = rel.norm_squared() - guard * guard;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return step;
    }
    let s = (-b - disc.sqrt()) / (2.0 * a);
    if (0.0..1.0).contains(&s) {
        step * s
    } else {
        step
    }
}

fn guard_radius(model: &MeasurementModel, cfg: &PlannerConfig) -> f64 {
    cfg.r_min_guard.max(model.min_range() + cfg.r_min_guard)
}

fn weight_with_fallback(metric: &LossMetric, matrix: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    match gradient_weight(metric, matrix, delta) {
        Err(Error::DegenerateEig { .. }) => gradient_weight(&LossMetric::TraceInv, matrix, delta),
        other => other,
    }
}

/// Loss gradients for every sensor; sensors outside the model domain get a
/// zero gradient and are left out of the FIM.
fn joint_gradient(
    metric: &LossMetric,
    models: &[MeasurementModel],
    positions: &[Position],
    q_hat: &Position,
    delta: f64,
) -> Result<Vec<DVector<f64>>> {
    let k = q_hat.len();
    let usable: Vec<bool> = models
        .iter()
        .zip(positions)
        .map(|(m, p)| (p - q_hat).norm() > m.min_range())
        .collect();
    let mut matrix = DMatrix::zeros(k, k);
    for ((m, p), ok) in models.iter().zip(positions).zip(&usable) {
        if *ok {
            matrix += information::partial_fim(m, p, q_hat)?.0;
        }
    }
    let weight = weight_with_fallback(metric, &matrix, delta)?;
    models
        .iter()
        .zip(positions)
        .zip(&usable)
        .map(|((m, p), ok)| {
            if *ok {
                weighted_sensor_gradient(&weight, m, p, q_hat)
            } else {
                Ok(DVector::zeros(k))
            }
        })
        .collect()
}

/// Joint descent over all sensors. Returns `waypoints[t][i]` for `t = 1..=T`.
pub fn plan_centralized(
    positions: &[Position],
    q_hat: &Position,
    models: &[MeasurementModel],
    cfg: &PlannerConfig,
) -> Result<Vec<Vec<Position>>> {
    let mut current = positions.to_vec();
    let mut out = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let grads = joint_gradient(&cfg.metric, models, &current, q_hat, cfg.delta)?;
        current = current
            .iter()
            .zip(grads)
            .zip(models)
            .map(|((p, g), m)| {
                let step = clip(g * -cfg.step_size, cfg.max_step_norm);
                p + guard_step(p, step, q_hat, guard_radius(m, cfg))
            })
            .collect();
        out.push(current.clone());
    }
    Ok(out)
}

/// Descent direction input `dL/dp_j ~ -2 J_j W(F_hat) A_j` with the consensus
/// estimate `F_hat` standing in for the global FIM. `None` when `|A_j|` vanishes.
pub fn distributed_gradient(
    p: &Position,
    q_hat: &Position,
    fim_estimate: &DMatrix<f64>,
    model: &MeasurementModel,
    metric: &LossMetric,
    delta: f64,
) -> Result<Option<DVector<f64>>> {
    let a = information::sensitivity(model, p, q_hat)?;
    if a.norm() < 1e-12 {
        return Ok(None);
    }
    let weight = weight_with_fallback(metric, fim_estimate, delta)?;
    weighted_sensor_gradient(&weight, model, p, q_hat).map(Some)
}

/// Single-agent descent using its own FIM estimate.
pub fn plan_distributed(
    p: &Position,
    q_hat: &Position,
    fim_estimate: &DMatrix<f64>,
    model: &MeasurementModel,
    cfg: &PlannerConfig,
) -> Result<Vec<Position>> {
    let guard = guard_radius(model, cfg);
    let mut current = p.clone();
    let mut out = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        if (&current - q_hat).norm() > model.min_range() {
            if let Some(g) = distributed_gradient(&current, q_hat, fim_estimate, model, &cfg.metric, cfg.delta)? {
                let step = clip(g * -cfg.step_size, cfg.max_step_norm);
                current += guard_step(&current, step, q_hat, guard);
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Joint descent on the neighborhood-local loss; `positions[0]` and
/// `models[0]` belong to the planning agent, whose waypoints are returned.
pub fn plan_variation(
    positions: &[Position],
    q_hat: &Position,
    models: &[MeasurementModel],
    cfg: &PlannerConfig,
) -> Result<Vec<Position>> {
    Ok(plan_centralized(positions, q_hat, models, cfg)?
        .into_iter()
        .map(|mut step| step.swap_remove(0))
        .collect())
}

/// Head straight for the estimate at capped speed.
pub fn plan_straight_line(p: &Position, q_hat: &Position, cfg: &PlannerConfig) -> Position {
    p + clip(q_hat - p, cfg.max_step_norm)
}
