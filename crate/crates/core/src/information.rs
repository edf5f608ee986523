//! Fisher information, information losses and their sensor-position gradients.
//!
//! For isotropic measurements the information about the source position is
//! `FIM = sum_j A_j A_j^T` with sensitivity `A_j = grad_q h_j = -g'(r_j) r_j_hat`.
//! Every supported loss has a partial gradient of the form
//! `dL/dp_j = -2 J_j W A_j`, where `J_j = grad_{p_j} A_j` is symmetric and the
//! k x k weight `W` depends only on the metric and the (global) FIM. The
//! distributed planner reuses this by substituting a consensus FIM estimate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::measurement::{MeasurementModel, Position};

/// Default Tikhonov term added to the FIM before inversion.
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Relative eigen-gap under which `lambda_min` is treated as repeated.
pub const EIG_TIE_TOL: f64 = 1e-8;

/// One sensor's rank-one contribution `A_j A_j^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFim(pub DMatrix<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub matrix: DMatrix<f64>,
    pub delta: f64,
}

impl FisherInfo {
    pub fn new(matrix: DMatrix<f64>, delta: f64) -> Self {
        Self { matrix, delta }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `M + delta I`.
    pub fn regularized(&self) -> DMatrix<f64> {
        regularize(&self.matrix, self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossMetric {
    /// `Tr((M + dI)^-1)` (A-optimality).
    TraceInv,
    /// `1 / lambda_min(M + dI)` (E-optimality).
    LambdaMaxInv,
    /// `-log det(M + dI)` (D-optimality).
    NegLogDet,
    /// Trace of the EKF posterior covariance `(M / r_scale + P0^-1)^-1`.
    Covariance { p0_inv: DMatrix<f64>, r_scale: f64 },
}

impl LossMetric {
    pub fn name(&self) -> &'static str {
        match self {
            LossMetric::TraceInv => "trace_inv",
            LossMetric::LambdaMaxInv => "lambda_max_inv",
            LossMetric::NegLogDet => "neg_log_det",
            LossMetric::Covariance { .. } => "covariance",
        }
    }
}

fn regularize(m: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let k = m.nrows();
    m + DMatrix::identity(k, k) * delta
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("information matrix is singular".into()))?;
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::Numeric("non-finite inverse".into()))
    }
}

fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

/// Unit vector from `q` to `p` and the range.
fn direction(p: &Position, q: &Position) -> (DVector<f64>, f64) {
    let d = p - q;
    let r = d.norm();
    (d / r, r)
}

/// `A = grad_q h(p, q) = -g'(r) r_hat`.
pub fn sensitivity(model: &MeasurementModel, p: &Position, q: &Position) -> Result<DVector<f64>> {
    let (r_hat, r) = direction(p, q);
    let g1 = model.deriv(r, 1)?;
    Ok(r_hat * -g1)
}

/// `grad_p A = -g''(r) r_hat r_hat^T - (g'(r)/r)(I - r_hat r_hat^T)`.
///
/// In the plane the projector equals `t_hat t_hat^T` for the unit tangent.
pub fn sensitivity_jacobian(model: &MeasurementModel, p: &Position, q: &Position) -> Result<DMatrix<f64>> {
    let (r_hat, r) = direction(p, q);
    let g1 = model.deriv(r, 1)?;
    let g2 = model.deriv(r, 2)?;
    let k = p.len();
    let radial = &r_hat * r_hat.transpose();
    let tangential = DMatrix::identity(k, k) - &radial;
    Ok(radial * -g2 - tangential * (g1 / r))
}

pub fn partial_fim(model: &MeasurementModel, p: &Position, q: &Position) -> Result<PartialFim> {
    let a = sensitivity(model, p, q)?;
    Ok(PartialFim(&a * a.transpose()))
}

/// Closed-form FIM `sum_j |g_j'(r_j)|^2 r_j_hat r_j_hat^T`.
pub fn fim(models: &[MeasurementModel], positions: &[Position], q: &Position, delta: f64) -> Result<FisherInfo> {
    if models.len() != positions.len() || models.is_empty() {
        return Err(Error::Config(format!(
            "fim needs matching non-empty model/position lists ({} vs {})",
            models.len(),
            positions.len()
        )));
    }
    let k = q.len();
    let mut matrix = DMatrix::zeros(k, k);
    for (j, (model, p)) in models.iter().zip(positions).enumerate() {
        matrix += partial_fim(model, p, q).map_err(|e| e.at_sensor(j))?.0;
    }
    Ok(FisherInfo::new(matrix, delta))
}

pub fn loss(metric: &LossMetric, fim: &FisherInfo) -> Result<f64> {
    let value = match metric {
        LossMetric::TraceInv => inverse(&fim.regularized())?.trace(),
        LossMetric::LambdaMaxInv => {
            let (values, _) = sorted_eigen(&fim.regularized());
            if values[0] <= 0.0 {
                return Err(Error::Numeric(format!("lambda_min = {} not positive", values[0])));
            }
            1.0 / values[0]
        }
        LossMetric::NegLogDet => {
            let det = fim.regularized().determinant();
            if det <= 0.0 {
                return Err(Error::Numeric(format!("determinant {det} not positive")));
            }
            -det.ln()
        }
        LossMetric::Covariance { p0_inv, r_scale } => inverse(&(&fim.matrix / *r_scale + p0_inv))?.trace(),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!("{} loss overflowed", metric.name())))
    }
}

/// Weight `W` with `dL/dp_j = -2 J_j W A_j`, evaluated at the (un-regularized) FIM `matrix`.
pub fn gradient_weight(metric: &LossMetric, matrix: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    match metric {
        LossMetric::TraceInv => {
            let inv = inverse(&regularize(matrix, delta))?;
            Ok(&inv * &inv)
        }
        LossMetric::NegLogDet => inverse(&regularize(matrix, delta)),
        LossMetric::Covariance { p0_inv, r_scale } => {
            let inv = inverse(&(matrix / *r_scale + p0_inv))?;
            Ok(&inv * &inv / *r_scale)
        }
        LossMetric::LambdaMaxInv => {
            let (values, vectors) = sorted_eigen(&regularize(matrix, delta));
            let lmin = values[0];
            if lmin <= 0.0 {
                return Err(Error::Numeric(format!("lambda_min = {lmin} not positive")));
            }
            if values.len() > 1 {
                let scale = values[values.len() - 1].abs().max(f64::MIN_POSITIVE);
                let gap = (values[1] - lmin) / scale;
                if gap < EIG_TIE_TOL {
                    return Err(Error::DegenerateEig { gap });
                }
            }
            let u = vectors.column(0);
            Ok(u * u.transpose() / (lmin * lmin))
        }
    }
}

/// Partial gradient of one sensor given the weight of [`gradient_weight`].
pub fn weighted_sensor_gradient(
    weight: &DMatrix<f64>,
    model: &MeasurementModel,
    p: &Position,
    q: &Position,
) -> Result<DVector<f64>> {
    let a = sensitivity(model, p, q)?;
    let jac = sensitivity_jacobian(model, p, q)?;
    Ok(jac * (weight * a) * -2.0)
}

/// Analytic `dL/dp_j`.
pub fn loss_grad(
    metric: &LossMetric,
    models: &[MeasurementModel],
    positions: &[Position],
    q: &Position,
    j: usize,
    delta: f64,
) -> Result<DVector<f64>> {
    let info = fim(models, positions, q, delta)?;
    let weight = gradient_weight(metric, &info.matrix, delta)?;
    weighted_sensor_gradient(&weight, &models[j], &positions[j], q).map_err(|e| e.at_sensor(j))
}

/// Gradient with respect to every sensor position, sharing one FIM evaluation.
pub fn loss_grad_all(
    metric: &LossMetric,
    models: &[MeasurementModel],
    positions: &[Position],
    q: &Position,
    delta: f64,
) -> Result<Vec<DVector<f64>>> {
    let info = fim(models, positions, q, delta)?;
    let weight = gradient_weight(metric, &info.matrix, delta)?;
    models
        .iter()
        .zip(positions)
        .enumerate()
        .map(|(j, (m, p))| weighted_sensor_gradient(&weight, m, p, q).map_err(|e| e.at_sensor(j)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// `1 / (m L)` with `L = Tr((FIM + dI)^-1)`.
    pub lhs: f64,
    /// `max_i |g_i'(r_i)|^2`.
    pub rhs: f64,
    pub satisfied: bool,
    /// `sum r_hat r_hat^T` is (numerically) singular.
    pub degenerate: bool,
}

/// Checks `1 / (m L) <= max_i |g_i'(r_i)|^2` for the trace-inverse loss.
pub fn prop1_bound_check(
    models: &[MeasurementModel],
    positions: &[Position],
    q: &Position,
    delta: f64,
) -> Result<BoundReport> {
    let k = q.len();
    let mut directions = DMatrix::zeros(k, k);
    let mut rhs: f64 = 0.0;
    for (j, (model, p)) in models.iter().zip(positions).enumerate() {
        let (r_hat, r) = direction(p, q);
        directions += &r_hat * r_hat.transpose();
        rhs = rhs.max(model.deriv(r, 1).map_err(|e| e.at_sensor(j))?.powi(2));
    }
    let (values, _) = sorted_eigen(&directions);
    let degenerate = values[0] <= 1e-9;
    let info = fim(models, positions, q, delta)?;
    let lhs = match loss(&LossMetric::TraceInv, &info) {
        Ok(l) => 1.0 / (models.len() as f64 * l),
        Err(_) if degenerate => 0.0,
        Err(e) => return Err(e),
    };
    Ok(BoundReport {
        lhs,
        rhs,
        satisfied: lhs <= rhs * (1.0 + 1e-9),
        degenerate,
    })
}
