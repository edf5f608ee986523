//! Built-in experiment suite.
//!
//! Each scenario is a base config plus one or more arms (mode or parameter
//! variants). Configs are exchanged as JSON values so user files can override
//! any field before deserialization.

use serde_json::{json, Value};

use crate::config::{
    DelayConfig, ExperimentConfig, FilterConfig, InitialGuess, MetricConfig, MetricKind, PlannerSettings, SensorInit,
    SourceConfig, SourceMotion,
};
use crate::control::Mode;
use crate::measurement::MeasurementModel;
use crate::network::Topology;

/// Gradient step for team scenarios. The information loss grows like `r^6`
/// and a straggler's gradient is negligible once the rest of the team sits
/// at the source, so the step is effectively "always move at the speed cap".
pub const SUITE_STEP_SIZE: f64 = 1e20;

/// Position process noise for team scenarios; keeps the filter responsive
/// while sensors close in and the measurement geometry changes quickly.
pub const SUITE_Q_POSITION: f64 = 0.1;

/// Prior variance of the estimated source velocity. A stiff velocity prior
/// keeps early, low-SNR innovations from being absorbed as source motion.
pub const SUITE_P0_VELOCITY: f64 = 1e-4;

/// Gradient step for the three-sensor scenarios. Small enough that sensors
/// slow down near the estimate, which a moving source needs.
pub const TRIO_STEP_SIZE: f64 = 1e4;

/// Velocity prior for the three-sensor scenarios.
pub const TRIO_P0_VELOCITY: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct Arm {
    pub label: String,
    pub config: Value,
}

#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> Vec<Arm>,
}

impl Scenario {
    pub fn arms(&self) -> Vec<Arm> {
        (self.build)()
    }
}

fn base(n: usize) -> ExperimentConfig {
    ExperimentConfig {
        scenario: String::new(),
        arm: String::new(),
        mode: Mode::Centralized,
        n_sensors: n,
        trials: 100,
        base_seed: 0,
        sensors: SensorInit::UniformBox { min: vec![0.0, 0.0], max: vec![3.0, 3.0] },
        source: SourceConfig { position: vec![6.0, 6.0], motion: SourceMotion::Stationary },
        initial_guess: InitialGuess::Fixed { position: vec![3.0, 3.0] },
        world_model: MeasurementModel::inverse_square(0.01),
        delta_b: 0.0,
        filter: FilterConfig { q_position: SUITE_Q_POSITION, p0_velocity: SUITE_P0_VELOCITY, ..FilterConfig::default() },
        planner: PlannerSettings { step_size: SUITE_STEP_SIZE, ..PlannerSettings::default() },
        topology: Topology::Circulant { degree: 2 },
        delays: DelayConfig::None,
        epsilon0: 0.5,
        reach_threshold: 0.2,
        max_ticks: 300,
        stop_on_success: false,
        oracle_estimate: false,
        output_dir: None,
    }
}

fn three_sensor() -> ExperimentConfig {
    ExperimentConfig {
        sensors: SensorInit::Fixed { positions: vec![vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 2.0]] },
        initial_guess: InitialGuess::Fixed { position: vec![3.0, 4.0] },
        filter: FilterConfig { p0_velocity: TRIO_P0_VELOCITY, ..FilterConfig::default() },
        planner: PlannerSettings { step_size: TRIO_STEP_SIZE, ..PlannerSettings::default() },
        ..base(3)
    }
}

fn arm(label: impl Into<String>, cfg: ExperimentConfig) -> Arm {
    Arm { label: label.into(), config: serde_json::to_value(cfg).expect("config serializes") }
}

fn with_mode(cfg: &ExperimentConfig, mode: Mode) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.mode = mode;
    if mode.is_distributed() {
        c.initial_guess = InitialGuess::UniformBox { min: vec![0.0, 0.0], max: vec![3.0, 3.0] };
    }
    c
}

fn seeking_arms(cfg: ExperimentConfig) -> Vec<Arm> {
    vec![arm("info", cfg.clone()), arm("straight_line", with_mode(&cfg, Mode::StraightLine))]
}

fn a1_stationary() -> Vec<Arm> {
    seeking_arms(ExperimentConfig { stop_on_success: true, ..three_sensor() })
}

fn a1_moving() -> Vec<Arm> {
    let motion = SourceMotion::Circular { center: vec![6.0, 6.0], radius: 2.0, angular_speed: 0.02 };
    seeking_arms(ExperimentConfig {
        source: SourceConfig { position: vec![8.0, 6.0], motion },
        ..three_sensor()
    })
}

fn swarm(n: usize) -> Vec<Arm> {
    vec![arm("info", base(n))]
}

fn swarm_generic() -> Vec<Arm> {
    let mut arms = swarm(0);
    if let Value::Object(map) = &mut arms[0].config {
        map.remove("n_sensors");
    }
    arms
}

fn metrics() -> Vec<Arm> {
    let kinds = [
        ("trace_inv", MetricKind::TraceInv),
        ("lambda_max_inv", MetricKind::LambdaMaxInv),
        ("neg_log_det", MetricKind::NegLogDet),
        ("covariance", MetricKind::Covariance),
    ];
    kinds
        .into_iter()
        .map(|(label, kind)| {
            let mut cfg = three_sensor();
            cfg.planner.metric = MetricConfig { kind, ..MetricConfig::default() };
            arm(label, cfg)
        })
        .collect()
}

fn robustness() -> Vec<Arm> {
    let mut arms = Vec::new();
    for (label, mode) in [("moving", Mode::Centralized), ("stationary", Mode::Stationary)] {
        for db in [0.0, 0.1, -0.1, 0.5, -0.5] {
            let cfg = ExperimentConfig { mode, delta_b: db, ..base(10) };
            arms.push(arm(format!("{label}_db{db:+}"), cfg));
        }
    }
    arms
}

fn variations(n: usize) -> Vec<Arm> {
    let cfg = base(n);
    vec![
        arm("consensus", with_mode(&cfg, Mode::DistributedConsensus)),
        arm("variation_i", with_mode(&cfg, Mode::VariationI)),
        arm("variation_ii", with_mode(&cfg, Mode::VariationII)),
        arm("centralized", cfg),
    ]
}

fn init_guess(d: f64) -> Vec<Arm> {
    let cfg = ExperimentConfig { initial_guess: InitialGuess::Deviation { side: d }, ..base(5) };
    let mut distributed = cfg.clone();
    distributed.mode = Mode::DistributedConsensus;
    vec![arm("distributed", distributed), arm("centralized", cfg)]
}

fn delay(n: usize) -> Vec<Arm> {
    let cfg = ExperimentConfig { delays: DelayConfig::InDegree, ..base(n) };
    vec![arm("distributed", with_mode(&cfg, Mode::DistributedConsensus)), arm("centralized", cfg)]
}

macro_rules! scenario {
    ($name:expr, $desc:expr, $build:expr) => {
        Scenario { name: $name, description: $desc, build: $build }
    };
}

/// Every built-in scenario, in presentation order.
pub fn all() -> Vec<Scenario> {
    vec![
        scenario!("5A1-stationary", "3 sensors, fixed source at (6,6); information seeking vs straight line", a1_stationary),
        scenario!("5A1-moving", "3 sensors, source circling (6,6) at radius 2; information seeking vs straight line", a1_moving),
        scenario!("5A2-swarm", "centralized swarm from a 3x3 box; set n_sensors", swarm_generic),
        scenario!("5A2-swarm-3", "centralized swarm, 3 sensors", || swarm(3)),
        scenario!("5A2-swarm-10", "centralized swarm, 10 sensors", || swarm(10)),
        scenario!("5A2-swarm-20", "centralized swarm, 20 sensors", || swarm(20)),
        scenario!("5A2-swarm-50", "centralized swarm, 50 sensors", || swarm(50)),
        scenario!("5A3-metrics", "3 sensors under each information metric", metrics),
        scenario!("5A4-robustness", "10 sensors, exponent error db in {0, +-0.1, +-0.5}, moving vs stationary", robustness),
        scenario!("5B-variations-4", "distributed algorithm vs variations I/II vs centralized, 4 sensors on a ring", || variations(4)),
        scenario!("5B-variations-10", "distributed algorithm vs variations I/II vs centralized, 10 sensors on a ring", || variations(10)),
        scenario!("5B-variations-20", "distributed algorithm vs variations I/II vs centralized, 20 sensors on a ring", || variations(20)),
        scenario!("5B-variations-40", "distributed algorithm vs variations I/II vs centralized, 40 sensors on a ring", || variations(40)),
        scenario!("5C-initguess-10", "5 sensors, initial guesses in a box of side 10 around the source", || init_guess(10.0)),
        scenario!("5C-initguess-20", "5 sensors, initial guesses in a box of side 20 around the source", || init_guess(20.0)),
        scenario!("5C-initguess-40", "5 sensors, initial guesses in a box of side 40 around the source", || init_guess(40.0)),
        scenario!("5D-delay-10", "half-tick delay per incoming link, 10 sensors", || delay(10)),
        scenario!("5D-delay-20", "half-tick delay per incoming link, 20 sensors", || delay(20)),
        scenario!("5D-delay-40", "half-tick delay per incoming link, 40 sensors", || delay(40)),
        scenario!("custom", "bare defaults (centralized, 3x3 box, source at (6,6)); set n_sensors", swarm_generic),
    ]
}

pub fn find(name: &str) -> Option<Scenario> {
    let name = match name {
        "paper-5A1" => "5A1-stationary",
        other => other,
    };
    all().into_iter().find(|s| s.name == name)
}

/// One line per scenario for `list-scenarios`.
pub fn listing() -> String {
    let mut out = String::new();
    for s in all() {
        let arms: Vec<_> = s.arms().into_iter().map(|a| a.label).collect();
        out.push_str(&format!("{:<18} {}  [arms: {}]\n", s.name, s.description, arms.join(", ")));
    }
    out
}

/// Config document for a scenario arm with field overrides applied, as used by tests.
pub fn arm_config(name: &str, arm: &str, overrides: Value) -> crate::Result<ExperimentConfig> {
    let mut doc = json!({ "scenario": name, "arm": arm });
    if let (Value::Object(d), Value::Object(o)) = (&mut doc, overrides) {
        d.extend(o);
    }
    Ok(crate::config::resolve(doc)?.swap_remove(0))
}
