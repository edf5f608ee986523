//! World state and the synchronous measure → estimate → move round.

mod metrics;

pub use metrics::{compute_metrics, median, MetricTable, Stat, TickStats};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::{DelayConfig, ExperimentConfig, InitialGuess, MetricKind, SensorInit, SourceMotion};
use crate::control::{self, Mode, PlannerConfig};
use crate::error::{Error, Result};
use crate::estimation::{self, EstimatorState, FilterParams, RangeObservations};
use crate::information::{self, BoundReport, FisherInfo, LossMetric};
use crate::measurement::{MeasurementModel, Position};
use crate::network::{delay_for, CommGraph, DelayChannel, DelayRole, FimConsensusState};
use crate::rng::{SeededRng, TrialSeed};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceState {
    pub position: Position,
    pub velocity: DVector<f64>,
    pub motion: SourceMotion,
    phase: f64,
}

impl SourceState {
    /// Circular motion snaps the start point onto the circle.
    pub fn new(position: Position, motion: SourceMotion) -> Self {
        let k = position.len();
        let mut s = Self { velocity: DVector::zeros(k), position, motion, phase: 0.0 };
        match &s.motion {
            SourceMotion::Stationary => {}
            SourceMotion::ConstantVelocity { velocity } => s.velocity = DVector::from_row_slice(velocity),
            SourceMotion::Circular { center, .. } => {
                let rel = &s.position - DVector::from_row_slice(center);
                s.phase = if rel.norm() > 0.0 { rel[1].atan2(rel[0]) } else { 0.0 };
                s.place();
            }
        }
        s
    }

    fn place(&mut self) {
        if let SourceMotion::Circular { center, radius, angular_speed } = &self.motion {
            let (sin, cos) = self.phase.sin_cos();
            self.position = DVector::from_vec(vec![center[0] + radius * cos, center[1] + radius * sin]);
            self.velocity = DVector::from_vec(vec![-radius * angular_speed * sin, radius * angular_speed * cos]);
        }
    }

    pub fn advance(&mut self) {
        match &self.motion {
            SourceMotion::Stationary => {}
            SourceMotion::ConstantVelocity { .. } => self.position += &self.velocity,
            SourceMotion::Circular { angular_speed, .. } => {
                self.phase += angular_speed;
                self.place();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Continue,
    Success,
}

/// Success iff some sensor is within `epsilon0` of the estimate it plans with.
pub fn check_termination(positions: &[Position], estimates: &[Position], epsilon0: f64) -> Termination {
    let hit = positions.iter().enumerate().any(|(i, p)| {
        let q_hat = if estimates.len() == 1 { &estimates[0] } else { &estimates[i] };
        (p - q_hat).norm() <= epsilon0
    });
    if hit {
        Termination::Success
    } else {
        Termination::Continue
    }
}

/// What one sensor broadcasts in a round.
#[derive(Debug, Clone)]
struct Packet {
    position: Position,
    reading: f64,
    z_hat: DVector<f64>,
    fim_hat: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
struct Link {
    from: usize,
    weight: f64,
    channel: DelayChannel<Packet>,
    last_used: Option<usize>,
}

#[derive(Debug, Clone)]
enum Estimation {
    Central {
        filter: EstimatorState,
        channel: DelayChannel<Vec<(Position, f64)>>,
        /// Sensor positions as last reported to the central node.
        known: Vec<Position>,
    },
    Distributed {
        filters: Vec<EstimatorState>,
        self_weights: Vec<f64>,
        links: Vec<Vec<Link>>,
        fims: Option<Vec<FimConsensusState>>,
    },
}

/// One logged tick; tick 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub source: Position,
    pub positions: Vec<Position>,
    /// Per-agent source estimates (the central estimate is repeated).
    pub estimates: Vec<Position>,
    /// Planning metric over the full team, evaluated at each agent's estimate.
    pub losses: Vec<f64>,
    /// Trace-inverse loss at the true source.
    pub true_loss: f64,
    pub bound: Option<BoundReport>,
    pub terminated: bool,
}

impl TickRecord {
    pub fn source_distances(&self) -> Vec<f64> {
        self.positions.iter().map(|p| (p - &self.source).norm()).collect()
    }

    pub fn estimate_errors(&self) -> Vec<f64> {
        self.estimates.iter().map(|q| (q - &self.source).norm()).collect()
    }

    pub fn median_distance(&self) -> f64 {
        median(&self.source_distances())
    }

    pub fn min_distance(&self) -> f64 {
        self.source_distances().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_distance(&self) -> f64 {
        self.source_distances().into_iter().fold(0.0, f64::max)
    }

    pub fn median_estimate_error(&self) -> f64 {
        median(&self.estimate_errors())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub max_ticks: usize,
    /// Executed ticks, starting with the initial state.
    pub records: Vec<TickRecord>,
    /// Tick at which the estimate-based termination test fired.
    pub terminated_at: Option<usize>,
}

impl TrialResult {
    /// Record at `tick`, holding the last state after an early stop.
    pub fn padded(&self, tick: usize) -> TickRecord {
        let last = self.records.len() - 1;
        let mut rec = self.records[tick.min(last)].clone();
        if tick > last {
            rec.tick = tick;
            rec.terminated = true;
        }
        rec
    }

    pub fn final_record(&self) -> &TickRecord {
        self.records.last().expect("trial has an initial record")
    }

    /// Goal of the seeking problem: some sensor within `epsilon` of the true source at the end.
    pub fn goal_reached(&self, epsilon: f64) -> bool {
        self.final_record().min_distance() <= epsilon
    }
}

pub struct World {
    pub tick: usize,
    pub source: SourceState,
    pub positions: Vec<Position>,
    pub world_model: MeasurementModel,
    pub estimator_model: MeasurementModel,
    pub graph: Option<CommGraph>,
    planner: PlannerConfig,
    mode: Mode,
    filter_params: FilterParams,
    metric_kind: MetricKind,
    use_estimator_cov: bool,
    oracle: bool,
    epsilon0: f64,
    noise: Vec<SeededRng>,
    estimation: Estimation,
}

fn uniform_in(rng: &mut SeededRng, min: &[f64], max: &[f64]) -> Position {
    Position::from_iterator(min.len(), min.iter().zip(max).map(|(a, b)| if a < b { rng.random_range(*a..*b) } else { *a }))
}

fn draw_guess(guess: &InitialGuess, q: &Position, rng: &mut SeededRng) -> Position {
    match guess {
        InitialGuess::Fixed { position } => Position::from_row_slice(position),
        InitialGuess::UniformBox { min, max } => uniform_in(rng, min, max),
        InitialGuess::Deviation { side } => {
            let half = side / 2.0;
            q + Position::from_iterator(q.len(), (0..q.len()).map(|_| half * rng.random_range(-1.0..=1.0)))
        }
    }
}

impl World {
    pub fn new(cfg: &ExperimentConfig, seed: TrialSeed) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_sensors;
        let mut setup = seed.setup();
        let positions: Vec<Position> = match &cfg.sensors {
            SensorInit::Fixed { positions } => positions.iter().map(|p| Position::from_row_slice(p)).collect(),
            SensorInit::UniformBox { min, max } => (0..n).map(|_| uniform_in(&mut setup, min, max)).collect(),
        };
        let source = SourceState::new(Position::from_row_slice(&cfg.source.position), cfg.source.motion.clone());
        let estimator_model = cfg.estimator_model();
        let filter_params = cfg.filter.params();
        let planner = cfg.planner_config();

        let graph = if cfg.mode.is_distributed() { Some(CommGraph::build(n, &cfg.topology)?) } else { None };
        let estimation = match &graph {
            None => {
                let guess = draw_guess(&cfg.initial_guess, &source.position, &mut seed.initial_guess(0));
                let delay = match cfg.delays {
                    DelayConfig::None => 0,
                    DelayConfig::InDegree => delay_for(DelayRole::Centralized(n)),
                    DelayConfig::Fixed { ticks } => ticks,
                };
                Estimation::Central {
                    filter: EstimatorState::new(&guess, &filter_params),
                    channel: DelayChannel::new(delay),
                    known: positions.clone(),
                }
            }
            Some(g) => {
                let filters: Vec<_> = (0..n)
                    .map(|j| {
                        let guess = draw_guess(&cfg.initial_guess, &source.position, &mut seed.initial_guess(j));
                        EstimatorState::new(&guess, &filter_params)
                    })
                    .collect();
                let links = (0..n)
                    .map(|j| {
                        let delay = match cfg.delays {
                            DelayConfig::None => 0,
                            DelayConfig::InDegree => delay_for(DelayRole::Distributed(g.in_degree(j))),
                            DelayConfig::Fixed { ticks } => ticks,
                        };
                        g.in_neighbors[j]
                            .iter()
                            .map(|&i| Link { from: i, weight: g.weight(j, i), channel: DelayChannel::new(delay), last_used: None })
                            .collect()
                    })
                    .collect();
                let fims = if cfg.mode == Mode::DistributedConsensus {
                    Some(
                        (0..n)
                            .map(|j| {
                                let f = partial_or_zero(&estimator_model, &positions[j], &filters[j].position())?;
                                Ok(FimConsensusState { estimate: f.clone(), current: f.clone(), previous: f })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                } else {
                    None
                };
                Estimation::Distributed { filters, self_weights: (0..n).map(|j| g.weight(j, j)).collect(), links, fims }
            }
        };
        Ok(Self {
            tick: 0,
            source,
            positions,
            world_model: cfg.world_model.clone(),
            estimator_model,
            graph,
            planner,
            mode: cfg.mode,
            filter_params,
            metric_kind: cfg.planner.metric.kind,
            use_estimator_cov: cfg.planner.metric.use_estimator_cov,
            oracle: cfg.oracle_estimate,
            epsilon0: cfg.epsilon0,
            noise: (0..n).map(|i| seed.sensor_noise(i)).collect(),
            estimation,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Per-agent source estimates.
    pub fn estimates(&self) -> Vec<Position> {
        match &self.estimation {
            Estimation::Central { filter, .. } => vec![filter.position(); self.n()],
            Estimation::Distributed { filters, .. } => filters.iter().map(EstimatorState::position).collect(),
        }
    }

    /// Estimates the planner and termination test act on.
    fn planning_targets(&self) -> Vec<Position> {
        if self.oracle {
            vec![self.source.position.clone(); self.n()]
        } else {
            self.estimates()
        }
    }

    pub fn check_termination(&self) -> Termination {
        check_termination(&self.positions, &self.planning_targets(), self.epsilon0)
    }

    /// Planning metric for a filter; the covariance metric takes its prior from the filter.
    fn metric_for(&self, filter: &EstimatorState) -> Result<LossMetric> {
        if self.metric_kind == MetricKind::Covariance && self.use_estimator_cov {
            let p0_inv = filter
                .position_cov()
                .try_inverse()
                .ok_or_else(|| Error::Numeric("estimator covariance is singular".into()))?;
            Ok(LossMetric::Covariance { p0_inv, r_scale: filter.meas_var })
        } else {
            Ok(self.planner.metric.clone())
        }
    }

    fn models(&self, count: usize) -> Vec<MeasurementModel> {
        vec![self.estimator_model.clone(); count]
    }

    /// One synchronous round.
    pub fn step(&mut self) -> Result<()> {
        let tick = self.tick + 1;
        self.source.advance();
        let q = self.source.position.clone();
        let readings = self
            .positions
            .iter()
            .zip(self.noise.iter_mut())
            .enumerate()
            .map(|(i, (p, rng))| self.world_model.measure(p, &q, rng).map_err(|e| e.at_step(tick, i)))
            .collect::<Result<Vec<_>>>()?;
        let moves = match self.estimation {
            Estimation::Central { .. } => self.central_round(tick, &readings)?,
            Estimation::Distributed { .. } => self.distributed_round(tick, &readings)?,
        };
        for (p, d) in self.positions.iter_mut().zip(moves) {
            *p += d;
        }
        self.tick = tick;
        Ok(())
    }

    fn central_round(&mut self, tick: usize, readings: &[f64]) -> Result<Vec<DVector<f64>>> {
        let n = self.n();
        let models = self.models(n);
        let Estimation::Central { filter, channel, known } = &mut self.estimation else { unreachable!() };
        channel.send(tick, self.positions.iter().cloned().zip(readings.iter().copied()).collect());
        let delay = channel.delay();
        let arrived = match channel.latest(tick) {
            Some((sent, batch)) if sent + delay == tick => Some(batch.clone()),
            _ => None,
        };
        *filter = match arrived {
            Some(batch) => {
                let (pos, y): (Vec<Position>, Vec<f64>) =
                    usable_readings(&models[0], &filter.position(), batch.iter().cloned()).unzip();
                let obs = RangeObservations::new(&models[..pos.len()], &pos);
                let next = estimation::local_ekf_update(filter, &obs, &DVector::from_vec(y)).map_err(|e| e.at_step(tick, 0))?;
                *known = batch.into_iter().map(|(p, _)| p).collect();
                next
            }
            None => estimation::predict(filter),
        };
        let known = known.clone();
        let filter = filter.clone();
        let target = if self.oracle { self.source.position.clone() } else { filter.position() };
        let planned: Vec<Position> = match self.mode {
            Mode::Stationary => known.clone(),
            Mode::StraightLine => known.iter().map(|p| control::plan_straight_line(p, &target, &self.planner)).collect(),
            _ => hold_on_numeric(
                self.metric_for(&filter).and_then(|metric| {
                    let cfg = PlannerConfig { metric, ..self.planner.clone() };
                    control::plan_centralized(&known, &target, &models, &cfg)
                }),
                || vec![known.clone()],
            )
            .map_err(|e| e.at_step(tick, 0))?
            .swap_remove(0),
        };
        Ok(planned.iter().zip(&known).map(|(a, b)| a - b).collect())
    }

    fn distributed_round(&mut self, tick: usize, readings: &[f64]) -> Result<Vec<DVector<f64>>> {
        let n = self.n();
        let model = self.estimator_model.clone();
        let mode = self.mode;
        let oracle_q = self.oracle.then(|| self.source.position.clone());
        let positions = self.positions.clone();
        let Estimation::Distributed { filters, self_weights, links, fims } = &mut self.estimation else { unreachable!() };

        // broadcast state from the end of the previous round
        for incoming in links.iter_mut() {
            for link in incoming.iter_mut() {
                let i = link.from;
                link.channel.send(
                    tick,
                    Packet {
                        position: positions[i].clone(),
                        reading: readings[i],
                        z_hat: filters[i].z_hat.clone(),
                        fim_hat: fims.as_ref().map(|f| f[i].estimate.clone()),
                    },
                );
            }
        }

        let mut next_filters = Vec::with_capacity(n);
        let mut next_fims = Vec::with_capacity(n);
        let mut neighborhoods = Vec::with_capacity(n);
        for j in 0..n {
            let mut obs_pos = vec![positions[j].clone()];
            let mut obs_y = vec![readings[j]];
            let mut known_pos = vec![positions[j].clone()];
            let mut mix = vec![(filters[j].z_hat.clone(), self_weights[j])];
            let mut fim_mix = fims.as_ref().map(|f| &f[j].estimate * self_weights[j]);
            for link in links[j].iter_mut() {
                let delay = link.channel.delay();
                let last_used = link.last_used;
                match link.channel.latest(tick) {
                    Some((sent, packet)) => {
                        if last_used.is_none_or(|u| sent > u) {
                            obs_pos.push(packet.position.clone());
                            obs_y.push(packet.reading);
                        }
                        debug_assert!(sent + delay <= tick);
                        known_pos.push(packet.position.clone());
                        mix.push((packet.z_hat.clone(), link.weight));
                        if let (Some(acc), Some(f)) = (fim_mix.as_mut(), &packet.fim_hat) {
                            *acc += f * link.weight;
                        }
                        link.last_used = Some(sent);
                    }
                    None => {
                        // nothing heard yet: the neighbor's share stays with the agent
                        mix.push((filters[j].z_hat.clone(), link.weight));
                        if let Some(acc) = fim_mix.as_mut() {
                            *acc += &fims.as_ref().unwrap()[j].estimate * link.weight;
                        }
                    }
                }
            }
            let (obs_pos, obs_y): (Vec<Position>, Vec<f64>) =
                usable_readings(&model, &filters[j].position(), obs_pos.into_iter().zip(obs_y)).unzip();
            let models = vec![model.clone(); obs_pos.len()];
            let obs = RangeObservations::new(&models, &obs_pos);
            let y = DVector::from_vec(obs_y);
            let next = match mode {
                Mode::VariationII => estimation::local_ekf_update(&filters[j], &obs, &y),
                _ => estimation::consensus_ekf_update(&filters[j], &mix, &obs, &y),
            }
            .map_err(|e| e.at_step(tick, j))?;
            if let (Some(f), Some(acc)) = (fims.as_ref(), fim_mix) {
                let current = partial_or_zero(&model, &positions[j], &next.position()).map_err(|e| e.at_step(tick, j))?;
                let previous = f[j].current.clone();
                let estimate = acc + &current - &previous;
                next_fims.push(FimConsensusState { estimate, current, previous });
            }
            next_filters.push(next);
            neighborhoods.push(known_pos);
        }
        *filters = next_filters;
        if let Some(f) = fims.as_mut() {
            *f = next_fims;
        }
        let filters = filters.clone();
        let fims = fims.clone();

        let mut moves = Vec::with_capacity(n);
        for j in 0..n {
            let target = oracle_q.clone().unwrap_or_else(|| filters[j].position());
            let planned = self.metric_for(&filters[j]).and_then(|metric| {
                let cfg = PlannerConfig { metric, ..self.planner.clone() };
                match mode {
                    Mode::DistributedConsensus => {
                        let f_hat = &fims.as_ref().expect("FIM consensus state")[j].estimate;
                        control::plan_distributed(&positions[j], &target, f_hat, &model, &cfg)
                    }
                    _ => control::plan_variation(&neighborhoods[j], &target, &vec![model.clone(); neighborhoods[j].len()], &cfg),
                }
            });
            let first = hold_on_numeric(planned, || vec![positions[j].clone()])
                .map_err(|e| e.at_step(tick, j))?
                .swap_remove(0);
            moves.push(first - &positions[j]);
        }
        Ok(moves)
    }

    /// Snapshot of the current state for the trial log.
    pub fn record(&self, terminated: bool) -> TickRecord {
        let n = self.n();
        let estimates = self.estimates();
        let models = self.models(n);
        let delta = self.planner.delta;
        let team_loss = |q_hat: &Position, filter: &EstimatorState| -> f64 {
            self.metric_for(filter)
                .and_then(|metric| {
                    let fim = information::fim(&models, &self.positions, q_hat, delta)?;
                    information::loss(&metric, &fim)
                })
                .unwrap_or(f64::NAN)
        };
        let losses = match &self.estimation {
            Estimation::Central { filter, .. } => vec![team_loss(&estimates[0], filter); n],
            Estimation::Distributed { filters, .. } => filters.iter().zip(&estimates).map(|(f, q)| team_loss(q, f)).collect(),
        };
        let q = &self.source.position;
        let true_loss = information::fim(&models, &self.positions, q, delta)
            .and_then(|f: FisherInfo| information::loss(&LossMetric::TraceInv, &f))
            .unwrap_or(f64::NAN);
        let bound = information::prop1_bound_check(&models, &self.positions, q, delta).ok();
        TickRecord {
            tick: self.tick,
            source: q.clone(),
            positions: self.positions.clone(),
            estimates,
            losses,
            true_loss,
            bound,
            terminated,
        }
    }

    pub fn filter_params(&self) -> &FilterParams {
        &self.filter_params
    }
}

/// Partial FIM of one sensor, zero outside the model domain.
fn partial_or_zero(model: &MeasurementModel, p: &Position, q_hat: &Position) -> Result<DMatrix<f64>> {
    if (p - q_hat).norm() > model.min_range() + crate::measurement::DOMAIN_EPS {
        Ok(information::partial_fim(model, p, q_hat)?.0)
    } else {
        Ok(DMatrix::zeros(q_hat.len(), q_hat.len()))
    }
}

/// Runs one seeded trial until termination (when enabled) or `max_ticks`.
/// A planner that hits an ill-conditioned information matrix leaves the
/// sensor where it is for this tick instead of aborting the trial.
fn hold_on_numeric<T>(planned: Result<T>, hold: impl FnOnce() -> T) -> Result<T> {
    match planned {
        Err(Error::Numeric(_)) => Ok(hold()),
        other => other,
    }
}

/// Drops readings taken where the model is undefined at the estimate (a
/// sensor sitting on `q_hat`); the filter has no linearization there.
fn usable_readings<'a>(
    model: &'a MeasurementModel,
    q_hat: &'a Position,
    readings: impl Iterator<Item = (Position, f64)> + 'a,
) -> impl Iterator<Item = (Position, f64)> + 'a {
    readings.filter(move |(p, _)| (p - q_hat).norm() > model.min_range())
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let run = || -> Result<TrialResult> {
        let mut world = World::new(cfg, TrialSeed(seed))?;
        let mut records = vec![world.record(false)];
        let mut terminated_at = None;
        while world.tick < cfg.max_ticks {
            world.step()?;
            let done = world.check_termination() == Termination::Success;
            if done && terminated_at.is_none() {
                terminated_at = Some(world.tick);
            }
            let stop = done && cfg.stop_on_success;
            records.push(world.record(stop));
            if stop {
                break;
            }
        }
        Ok(TrialResult { trial, seed, max_ticks: cfg.max_ticks, records, terminated_at })
    };
    run().map_err(|e| Error::Trial { trial, source: Box::new(e) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use approx::assert_relative_eq;

    fn scenario(text: &str) -> ExperimentConfig {
        parse_config_str(text, false).unwrap().swap_remove(0)
    }

    #[test]
    fn termination_examples() {
        let p = vec![Position::from_vec(vec![0.4, 0.0])];
        let q = vec![Position::from_vec(vec![0.0, 0.0])];
        assert_eq!(check_termination(&p, &q, 0.5), Termination::Success);
        let p = vec![Position::from_vec(vec![0.6, 0.0])];
        assert_eq!(check_termination(&p, &q, 0.5), Termination::Continue);
    }

    #[test]
    fn circular_source_stays_on_circle() {
        let motion = SourceMotion::Circular { center: vec![6.0, 6.0], radius: 2.0, angular_speed: 0.02 };
        let mut s = SourceState::new(Position::from_vec(vec![8.0, 6.0]), motion);
        let c = Position::from_vec(vec![6.0, 6.0]);
        for _ in 0..1000 {
            s.advance();
            assert_relative_eq!((&s.position - &c).norm(), 2.0, epsilon = 1e-9);
            assert_relative_eq!(s.velocity.norm(), 0.04, epsilon = 1e-12);
        }
    }

    #[test]
    fn sensors_already_at_goal_stop_immediately() {
        let cfg = scenario(
            r#"
scenario = "5A1-stationary"
arm = "info"
world_model = { kind = "inverse_square", gain = 1.0, exponent = 2.0, offset = 0.0, shift = 0.0, noise_var = 0.0 }
initial_guess = { kind = "fixed", position = [6.0, 6.0] }
[sensors]
kind = "fixed"
positions = [[6.2, 6.0], [5.8, 6.1], [6.0, 5.7]]
"#,
        );
        let result = run_trial(&cfg, 0).unwrap();
        assert_eq!(result.terminated_at, Some(1));
        assert_eq!(result.records.len(), 2);
        for (a, b) in result.records[0].positions.iter().zip(&result.records[1].positions) {
            assert!((a - b).norm() <= cfg.planner.max_step_norm + 1e-12);
        }
    }

    #[test]
    fn trial_is_reproducible() {
        let cfg = scenario("scenario = \"5B-variations-10\"\narm = \"consensus\"\nmax_ticks = 20\n");
        let a = run_trial(&cfg, 3).unwrap();
        let b = run_trial(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&cfg, 4).unwrap();
        assert_ne!(a.records[5].positions, c.records[5].positions);
    }

    #[test]
    fn padding_holds_final_state() {
        let cfg = scenario("scenario = \"paper-5A1\"\narm = \"info\"\n");
        let r = run_trial(&cfg, 0).unwrap();
        let last = r.final_record().clone();
        let padded = r.padded(cfg.max_ticks);
        assert_eq!(padded.positions, last.positions);
        assert_eq!(padded.tick, cfg.max_ticks);
        if r.records.len() <= cfg.max_ticks {
            assert!(padded.terminated);
        }
    }

    #[test]
    fn delayed_trials_run() {
        for arm in ["distributed", "centralized"] {
            let cfg = scenario(&format!("scenario = \"5D-delay-10\"\narm = \"{arm}\"\nmax_ticks = 30\n"));
            let r = run_trial(&cfg, 0).unwrap();
            assert_eq!(r.records.len(), 31);
        }
    }
}
