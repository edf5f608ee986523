//! Experiment configuration.
//!
//! A config file names a built-in scenario and overrides any of its fields.
//! Resolution deep-merges the file over the scenario's base config and
//! deserializes the result with unknown keys rejected.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::{Mode, PlannerConfig};
use crate::error::{Error, Result};
use crate::estimation::FilterParams;
use crate::information::LossMetric;
use crate::measurement::{MeasurementModel, Position};
use crate::network::Topology;
use crate::scenarios;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    TraceInv,
    LambdaMaxInv,
    NegLogDet,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub kind: MetricKind,
    /// `P0^-1 = scale * I` when the covariance metric runs without a filter.
    pub p0_inv_scale: f64,
    /// Measurement-noise scale `R` of the covariance metric.
    pub r_scale: f64,
    /// Use the live estimator covariance as `P0` inside the simulator.
    pub use_estimator_cov: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: MetricKind::TraceInv,
            p0_inv_scale: 1.0,
            r_scale: 1.0,
            use_estimator_cov: true,
        }
    }
}

impl MetricConfig {
    /// Metric with a config-fixed prior.
    pub fn fixed_metric(&self, dim: usize) -> LossMetric {
        match self.kind {
            MetricKind::TraceInv => LossMetric::TraceInv,
            MetricKind::LambdaMaxInv => LossMetric::LambdaMaxInv,
            MetricKind::NegLogDet => LossMetric::NegLogDet,
            MetricKind::Covariance => LossMetric::Covariance {
                p0_inv: DMatrix::identity(dim, dim) * self.p0_inv_scale,
                r_scale: self.r_scale,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorInit {
    Fixed { positions: Vec<Vec<f64>> },
    UniformBox { min: Vec<f64>, max: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceMotion {
    Stationary,
    /// Constant-speed motion on a circle; the start point is `source.position`.
    Circular { center: Vec<f64>, radius: f64, angular_speed: f64 },
    ConstantVelocity { velocity: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub position: Vec<f64>,
    pub motion: SourceMotion,
}

/// Initial source estimate. Centralized runs draw once; distributed runs draw
/// independently per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    Fixed { position: Vec<f64> },
    UniformBox { min: Vec<f64>, max: Vec<f64> },
    /// `q + (D/2) * U[-1, 1]^k` around the true source.
    Deviation { side: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayConfig {
    None,
    /// Half a tick per incoming connection: `floor(m/2)` centralized, `floor(k/2)` distributed.
    InDegree,
    Fixed { ticks: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub q_position: f64,
    pub q_velocity: f64,
    pub meas_var: f64,
    pub p0: f64,
    pub p0_velocity: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = FilterParams::default();
        Self { q_position: p.q_position, q_velocity: p.q_velocity, meas_var: p.meas_var, p0: p.p0, p0_velocity: p.p0_velocity }
    }
}

impl FilterConfig {
    pub fn params(&self) -> FilterParams {
        FilterParams {
            q_position: self.q_position,
            q_velocity: self.q_velocity,
            meas_var: self.meas_var,
            p0: self.p0,
            p0_velocity: self.p0_velocity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSettings {
    pub step_size: f64,
    pub horizon: usize,
    pub max_step_norm: f64,
    pub delta: f64,
    pub r_min_guard: f64,
    pub metric: MetricConfig,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        let p = PlannerConfig::default();
        Self {
            step_size: p.step_size,
            horizon: p.horizon,
            max_step_norm: p.max_step_norm,
            delta: p.delta,
            r_min_guard: p.r_min_guard,
            metric: MetricConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Arm label within a multi-arm scenario.
    pub arm: String,
    pub mode: Mode,
    pub n_sensors: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub sensors: SensorInit,
    pub source: SourceConfig,
    pub initial_guess: InitialGuess,
    /// Law generating the simulated readings.
    pub world_model: MeasurementModel,
    /// Exponent error of the estimator's model: `b_hat = b + delta_b`.
    pub delta_b: f64,
    pub filter: FilterConfig,
    pub planner: PlannerSettings,
    pub topology: Topology,
    pub delays: DelayConfig,
    pub epsilon0: f64,
    pub reach_threshold: f64,
    pub max_ticks: usize,
    /// End the trial when the estimate-based termination test fires.
    pub stop_on_success: bool,
    /// Feed the true source state to the planner instead of the estimate.
    pub oracle_estimate: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.source.position.len()
    }

    pub fn estimator_model(&self) -> MeasurementModel {
        if self.delta_b == 0.0 {
            self.world_model.clone()
        } else {
            self.world_model.with_exponent(self.world_model.exponent + self.delta_b)
        }
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            step_size: self.planner.step_size,
            horizon: self.planner.horizon,
            max_step_norm: self.planner.max_step_norm,
            metric: self.planner.metric.fixed_metric(self.dim()),
            mode: self.mode,
            delta: self.planner.delta,
            r_min_guard: self.planner.r_min_guard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if !(k == 2 || k == 3) {
            return Err(Error::Config(format!("source.position must have 2 or 3 coordinates, got {k}")));
        }
        if self.n_sensors == 0 {
            return Err(Error::Config("n_sensors must be at least 1".into()));
        }
        let check_len = |name: &str, v: &[f64]| {
            if v.len() != k || v.iter().any(|x| !x.is_finite()) {
                Err(Error::Config(format!("{name} must hold {k} finite coordinates")))
            } else {
                Ok(())
            }
        };
        match &self.sensors {
            SensorInit::Fixed { positions } => {
                if positions.len() != self.n_sensors {
                    return Err(Error::Config(format!(
                        "sensors.positions lists {} sensors but n_sensors = {}",
                        positions.len(),
                        self.n_sensors
                    )));
                }
                for p in positions {
                    check_len("sensors.positions[..]", p)?;
                }
            }
            SensorInit::UniformBox { min, max } => {
                check_len("sensors.min", min)?;
                check_len("sensors.max", max)?;
                if min.iter().zip(max).any(|(a, b)| a > b) {
                    return Err(Error::Config("sensors.min exceeds sensors.max".into()));
                }
            }
        }
        check_len("source.position", &self.source.position)?;
        match &self.source.motion {
            SourceMotion::Stationary => {}
            SourceMotion::Circular { center, radius, angular_speed } => {
                check_len("source.motion.center", center)?;
                if k != 2 {
                    return Err(Error::Config("circular source motion is planar".into()));
                }
                if !(*radius > 0.0) || !angular_speed.is_finite() {
                    return Err(Error::Config("circular motion needs radius > 0".into()));
                }
            }
            SourceMotion::ConstantVelocity { velocity } => check_len("source.motion.velocity", velocity)?,
        }
        match &self.initial_guess {
            InitialGuess::Fixed { position } => check_len("initial_guess.position", position)?,
            InitialGuess::UniformBox { min, max } => {
                check_len("initial_guess.min", min)?;
                check_len("initial_guess.max", max)?;
            }
            InitialGuess::Deviation { side } => {
                if !(*side >= 0.0) {
                    return Err(Error::Config("initial_guess.side must be >= 0".into()));
                }
            }
        }
        self.world_model.validate()?;
        self.estimator_model().validate()?;
        if !(self.filter.meas_var > 0.0 && self.filter.p0 > 0.0 && self.filter.p0_velocity > 0.0 && self.filter.q_position >= 0.0 && self.filter.q_velocity >= 0.0) {
            return Err(Error::Config("filter needs meas_var > 0, p0 > 0, p0_velocity > 0 and non-negative process noise".into()));
        }
        self.planner_config().validate()?;
        if self.planner.metric.kind == MetricKind::Covariance
            && !(self.planner.metric.r_scale > 0.0 && self.planner.metric.p0_inv_scale >= 0.0)
        {
            return Err(Error::Config("covariance metric needs r_scale > 0 and p0_inv_scale >= 0".into()));
        }
        if !(self.epsilon0 > 0.0 && self.reach_threshold > 0.0) || self.max_ticks == 0 {
            return Err(Error::Config("epsilon0, reach_threshold and max_ticks must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.mode.is_distributed() {
            crate::network::CommGraph::build(self.n_sensors, &self.topology)?;
        }
        Ok(())
    }

    pub fn to_position(v: &[f64]) -> Position {
        Position::from_row_slice(v)
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let kind_changed = match (b.get("kind"), o.get("kind")) {
                (Some(x), Some(y)) => x != y,
                _ => false,
            };
            if kind_changed {
                *b = o;
                return;
            }
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Parses TOML (`.toml`) or JSON text into a generic value.
pub fn parse_text(text: &str, is_json: bool) -> Result<Value> {
    if is_json {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    } else {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Resolves a raw override document into one config per selected arm.
pub fn resolve(raw: Value) -> Result<Vec<ExperimentConfig>> {
    let Value::Object(mut raw) = raw else {
        return Err(Error::Config("config must be a table".into()));
    };
    let scenario_name = match raw.remove("scenario") {
        Some(Value::String(s)) => s,
        Some(other) => return Err(Error::Config(format!("scenario must be a string, got {other}"))),
        None => "custom".to_string(),
    };
    let scenario = scenarios::find(&scenario_name)
        .ok_or_else(|| Error::Config(format!("unknown scenario `{scenario_name}` (see list-scenarios)")))?;
    let arm_filter = match raw.remove("arm") {
        Some(Value::String(s)) => Some(s),
        Some(other) => return Err(Error::Config(format!("arm must be a string, got {other}"))),
        None => None,
    };
    let arms = scenario.arms();
    if let Some(name) = &arm_filter {
        if !arms.iter().any(|a| a.label == *name) {
            let labels: Vec<_> = arms.iter().map(|a| a.label.as_str()).collect();
            return Err(Error::Config(format!("scenario {} has no arm `{name}` (arms: {})", scenario.name, labels.join(", "))));
        }
    }
    let mut out = Vec::new();
    for arm in arms.into_iter().filter(|a| arm_filter.as_ref().is_none_or(|n| *n == a.label)) {
        let mut base = arm.config;
        merge(&mut base, Value::Object(raw.clone()));
        if let Value::Object(map) = &mut base {
            map.insert("scenario".into(), Value::String(scenario.name.to_string()));
            map.insert("arm".into(), Value::String(arm.label.clone()));
        }
        let cfg: ExperimentConfig = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        out.push(cfg);
    }
    Ok(out)
}

pub fn parse_config_str(text: &str, is_json: bool) -> Result<Vec<ExperimentConfig>> {
    resolve(parse_text(text, is_json)?)
}

/// Reads and resolves a TOML or JSON config file.
pub fn parse_config(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_config_str(&text, is_json).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
