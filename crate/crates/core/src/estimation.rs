//! Source-state estimation: local and consensus extended Kalman filters.
//!
//! The source state is `z = [q; v]` with constant-velocity dynamics
//! `z+ = [q + v; v]`. Prediction and correction are fused into one step and
//! the measurement Jacobian is evaluated at the prior estimate:
//!
//! ```text
//! K  = A P C^T (C P C^T + R)^-1
//! z+ = f(z) + K (y - H(q))
//! P+ = A P A^T + Q - K (C P C^T + R) K^T
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::information::sensitivity;
use crate::measurement::{MeasurementModel, Position};

pub const DEFAULT_Q_POSITION: f64 = 1e-4;
pub const DEFAULT_Q_VELOCITY: f64 = 1e-6;
pub const DEFAULT_MEAS_VAR: f64 = 0.01;
pub const DEFAULT_P0: f64 = 1.0;

/// Tolerance on `sum_i w_ji = 1`.
pub const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// `[q_hat; v_hat]`, length `2k`.
    pub z_hat: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    /// Per-reading noise variance; the filter uses `R = meas_var * I`.
    pub meas_var: f64,
}

/// Filter tuning shared by every estimator in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub q_position: f64,
    pub q_velocity: f64,
    pub meas_var: f64,
    /// Prior variance of the position block.
    pub p0: f64,
    /// Prior variance of the velocity block.
    pub p0_velocity: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            q_position: DEFAULT_Q_POSITION,
            q_velocity: DEFAULT_Q_VELOCITY,
            meas_var: DEFAULT_MEAS_VAR,
            p0: DEFAULT_P0,
            p0_velocity: DEFAULT_P0,
        }
    }
}

impl EstimatorState {
    /// Starts at `q_hat0` with zero velocity.
    pub fn new(q_hat0: &Position, params: &FilterParams) -> Self {
        let k = q_hat0.len();
        let mut z_hat = DVector::zeros(2 * k);
        z_hat.rows_mut(0, k).copy_from(q_hat0);
        let mut q_diag = DVector::from_element(2 * k, params.q_velocity);
        q_diag.rows_mut(0, k).fill(params.q_position);
        let mut p_diag = DVector::from_element(2 * k, params.p0_velocity);
        p_diag.rows_mut(0, k).fill(params.p0);
        Self {
            z_hat,
            cov: DMatrix::from_diagonal(&p_diag),
            process_noise: DMatrix::from_diagonal(&q_diag),
            meas_var: params.meas_var,
        }
    }

    pub fn dim(&self) -> usize {
        self.z_hat.len() / 2
    }

    pub fn position(&self) -> Position {
        self.z_hat.rows(0, self.dim()).into_owned()
    }

    pub fn velocity(&self) -> DVector<f64> {
        let k = self.dim();
        self.z_hat.rows(k, k).into_owned()
    }

    /// Position block of the covariance.
    pub fn position_cov(&self) -> DMatrix<f64> {
        let k = self.dim();
        self.cov.view((0, 0), (k, k)).into_owned()
    }
}

/// `A = [[I, I], [0, I]]`.
pub fn transition(k: usize) -> DMatrix<f64> {
    let mut a = DMatrix::identity(2 * k, 2 * k);
    a.view_mut((0, k), (k, k)).fill_with_identity();
    a
}

/// `f([q; v]) = [q + v; v]`.
pub fn propagate(z: &DVector<f64>) -> DVector<f64> {
    let k = z.len() / 2;
    let mut out = z.clone();
    for i in 0..k {
        out[i] += z[k + i];
    }
    out
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn predict(state: &EstimatorState) -> EstimatorState {
    let a = transition(state.dim());
    EstimatorState {
        z_hat: propagate(&state.z_hat),
        cov: symmetrize(&(&a * &state.cov * a.transpose() + &state.process_noise)),
        ..state.clone()
    }
}

/// Joint measurement function of a group of sensors, as seen by one filter.
pub trait ObservationModel {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `H(q)`.
    fn predict(&self, q: &Position) -> Result<DVector<f64>>;
    /// `grad_q H(q)`, one row per reading.
    fn jacobian(&self, q: &Position) -> Result<DMatrix<f64>>;
}

/// Isotropic range readings from sensors at known positions.
#[derive(Debug, Clone, Copy)]
pub struct RangeObservations<'a> {
    pub models: &'a [MeasurementModel],
    pub positions: &'a [Position],
}

impl<'a> RangeObservations<'a> {
    pub fn new(models: &'a [MeasurementModel], positions: &'a [Position]) -> Self {
        debug_assert_eq!(models.len(), positions.len());
        Self { models, positions }
    }
}

impl ObservationModel for RangeObservations<'_> {
    fn len(&self) -> usize {
        self.models.len()
    }

    fn predict(&self, q: &Position) -> Result<DVector<f64>> {
        let values = self
            .models
            .iter()
            .zip(self.positions)
            .enumerate()
            .map(|(i, (m, p))| m.expected(p, q).map_err(|e| e.at_sensor(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }

    fn jacobian(&self, q: &Position) -> Result<DMatrix<f64>> {
        let rows = self
            .models
            .iter()
            .zip(self.positions)
            .enumerate()
            .map(|(i, (m, p))| sensitivity(m, p, q).map(|a| a.transpose()).map_err(|e| e.at_sensor(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_rows(&rows))
    }
}

/// One fused predict/correct step. Returns the new mean and covariance.
fn ekf_step<O: ObservationModel + ?Sized>(
    state: &EstimatorState,
    obs: &O,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = state.dim();
    let m = obs.len();
    if y.len() != m {
        return Err(Error::Numeric(format!("{} readings for {} observation rows", y.len(), m)));
    }
    let a = transition(k);
    let predicted_cov = &a * &state.cov * a.transpose() + &state.process_noise;
    if m == 0 {
        return Ok((propagate(&state.z_hat), symmetrize(&predicted_cov)));
    }
    let q_hat = state.position();
    let mut c = DMatrix::zeros(m, 2 * k);
    c.view_mut((0, 0), (m, k)).copy_from(&obs.jacobian(&q_hat)?);
    let innovation_cov = &c * &state.cov * c.transpose() + DMatrix::identity(m, m) * state.meas_var;
    let s_inv = innovation_cov
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::Numeric("innovation covariance not positive definite".into()))?;
    let gain = &a * &state.cov * c.transpose() * s_inv;
    let residual = y - obs.predict(&q_hat)?;
    let z = propagate(&state.z_hat) + &gain * residual;
    let cov = symmetrize(&(predicted_cov - &gain * innovation_cov * gain.transpose()));
    if z.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite filter update".into()));
    }
    Ok((z, cov))
}

pub fn local_ekf_update<O: ObservationModel + ?Sized>(
    state: &EstimatorState,
    obs: &O,
    y: &DVector<f64>,
) -> Result<EstimatorState> {
    let (z_hat, cov) = ekf_step(state, obs, y)?;
    Ok(EstimatorState { z_hat, cov, ..state.clone() })
}

/// Consensus EKF: neighbor means are averaged, covariance is updated locally.
///
/// `neighbors` lists `(z_hat_i, w_ji)` for every member of the in-neighborhood,
/// the agent itself included.
pub fn consensus_ekf_update<O: ObservationModel + ?Sized>(
    state: &EstimatorState,
    neighbors: &[(DVector<f64>, f64)],
    obs: &O,
    y: &DVector<f64>,
) -> Result<EstimatorState> {
    check_weights(neighbors.iter().map(|(_, w)| *w))?;
    let (local, cov) = ekf_step(state, obs, y)?;
    let mut z_hat = DVector::zeros(state.z_hat.len());
    for (z, w) in neighbors {
        if z.len() != z_hat.len() {
            return Err(Error::Numeric("neighbor estimate has wrong dimension".into()));
        }
        z_hat.axpy(*w, z, 1.0);
    }
    z_hat += local - &state.z_hat;
    Ok(EstimatorState { z_hat, cov, ..state.clone() })
}

pub fn check_weights(weights: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w >= 0.0) {
            return Err(Error::Weight(format!("negative weight {w}")));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::Weight(format!("weights sum to {total}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn state_at(q: &[f64]) -> EstimatorState {
        EstimatorState::new(&dv(q), &FilterParams::default())
    }

    #[test]
    fn predict_moves_by_velocity() {
        let mut s = state_at(&[1.0, 1.0]);
        s.z_hat = dv(&[1.0, 1.0, 0.5, -0.5]);
        assert_eq!(predict(&s).z_hat, dv(&[1.5, 0.5, 0.5, -0.5]));
        let still = state_at(&[2.0, 3.0]);
        assert_eq!(predict(&still).position(), dv(&[2.0, 3.0]));
    }

    #[test]
    fn predict_from_zero_covariance_gives_process_noise() {
        let mut s = state_at(&[0.0, 0.0]);
        s.cov = DMatrix::zeros(4, 4);
        s.process_noise = DMatrix::identity(4, 4);
        assert_eq!(predict(&s).cov, DMatrix::identity(4, 4));
    }

    #[test]
    fn huge_measurement_noise_reduces_to_prediction() {
        let mut s = state_at(&[3.0, 4.0]);
        s.z_hat[2] = 0.1;
        s.meas_var = 1e14;
        let models = vec![MeasurementModel::inverse_square(0.0); 2];
        let ps = vec![dv(&[1.0, 2.0]), dv(&[2.0, 2.0])];
        let out = local_ekf_update(&s, &RangeObservations::new(&models, &ps), &dv(&[5.0, -3.0])).unwrap();
        assert_relative_eq!(out.z_hat, propagate(&s.z_hat), epsilon = 1e-9);
    }

    #[test]
    fn zero_innovation_reduces_to_prediction() {
        let mut s = state_at(&[3.0, 4.0]);
        s.z_hat[3] = -0.2;
        let models = vec![MeasurementModel::inverse_square(0.0); 3];
        let ps = vec![dv(&[1.0, 2.0]), dv(&[2.0, 2.0]), dv(&[3.0, 2.0])];
        let obs = RangeObservations::new(&models, &ps);
        let y = obs.predict(&s.position()).unwrap();
        let out = local_ekf_update(&s, &obs, &y).unwrap();
        assert_relative_eq!(out.z_hat, propagate(&s.z_hat), epsilon = 1e-14);
    }

    #[test]
    fn stationary_source_converges_with_fixed_sensors() {
        let q = dv(&[6.0, 6.0]);
        let models = vec![MeasurementModel::inverse_square(0.0); 5];
        let ps = vec![
            dv(&[5.0, 5.0]),
            dv(&[7.5, 5.5]),
            dv(&[6.5, 7.5]),
            dv(&[4.8, 6.9]),
            dv(&[6.2, 4.6]),
        ];
        let obs = RangeObservations::new(&models, &ps);
        let y = obs.predict(&q).unwrap();
        let mut s = state_at(&[6.6, 5.4]);
        assert!((s.position() - &q).norm() < 1.0);
        let mut converged = None;
        for it in 0..50 {
            s = local_ekf_update(&s, &obs, &y).unwrap();
            if (s.position() - &q).norm() < 0.05 {
                converged = Some(it);
                break;
            }
        }
        assert!(converged.is_some(), "final error {}", (s.position() - &q).norm());
    }

    #[test]
    fn self_weight_one_is_local_filter() {
        let s = state_at(&[3.0, 4.0]);
        let models = vec![MeasurementModel::inverse_square(0.0); 2];
        let ps = vec![dv(&[1.0, 2.0]), dv(&[2.0, 2.0])];
        let obs = RangeObservations::new(&models, &ps);
        let y = dv(&[0.05, 0.04]);
        let local = local_ekf_update(&s, &obs, &y).unwrap();
        let other = dv(&[9.0, 9.0, 1.0, 1.0]);
        let cons = consensus_ekf_update(&s, &[(s.z_hat.clone(), 1.0), (other, 0.0)], &obs, &y).unwrap();
        assert_relative_eq!(cons.z_hat, local.z_hat, epsilon = 1e-12);
        assert_eq!(cons.cov, local.cov);
        let same = consensus_ekf_update(&s, &[(s.z_hat.clone(), 0.5), (s.z_hat.clone(), 0.5)], &obs, &y).unwrap();
        assert_relative_eq!(same.z_hat, local.z_hat, epsilon = 1e-12);
    }

    #[test]
    fn zero_gain_consensus_averages_pair() {
        let mut a = state_at(&[0.0, 0.0]);
        let mut b = state_at(&[2.0, 4.0]);
        a.meas_var = f64::INFINITY;
        b.meas_var = f64::INFINITY;
        let none: [MeasurementModel; 0] = [];
        let obs = RangeObservations::new(&none, &[]);
        let y = DVector::zeros(0);
        let pair = [(a.z_hat.clone(), 0.5), (b.z_hat.clone(), 0.5)];
        let a1 = consensus_ekf_update(&a, &pair, &obs, &y).unwrap();
        let b1 = consensus_ekf_update(&b, &pair, &obs, &y).unwrap();
        assert_eq!(a1.position(), dv(&[1.0, 2.0]));
        assert_eq!(b1.position(), dv(&[1.0, 2.0]));
    }

    #[test]
    fn bad_weights_rejected() {
        let s = state_at(&[0.0, 0.0]);
        let obs = RangeObservations::new(&[], &[]);
        let y = DVector::zeros(0);
        let err = consensus_ekf_update(&s, &[(s.z_hat.clone(), 0.7)], &obs, &y).unwrap_err();
        assert!(matches!(err, Error::Weight(_)));
        let err = consensus_ekf_update(&s, &[(s.z_hat.clone(), 1.5), (s.z_hat.clone(), -0.5)], &obs, &y).unwrap_err();
        assert!(matches!(err, Error::Weight(_)));
    }
}
