//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use infoseek::information::{fim, loss, loss_grad_all, LossMetric};
use infoseek::measurement::{MeasurementModel, Position};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DELTA: f64 = 1e-6;

pub fn pos(v: &[f64]) -> Position {
    Position::from_column_slice(v)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random sensing geometry: every sensor at least `min_range` from `q`.
pub struct Geometry {
    pub models: Vec<MeasurementModel>,
    pub positions: Vec<Position>,
    pub q: Position,
}

pub fn random_geometry(rng: &mut ChaCha8Rng, dim: usize, min_range: f64) -> Geometry {
    let n = rng.random_range(dim..=6);
    let q = Position::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
    let mut positions = Vec::with_capacity(n);
    while positions.len() < n {
        let p = Position::from_fn(dim, |_, _| rng.random_range(-6.0..6.0));
        if (&p - &q).norm() > min_range {
            positions.push(p);
        }
    }
    let models = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                MeasurementModel::inverse_square(0.01)
            } else {
                let gain = rng.random_range(0.5..2.0);
                let exponent = rng.random_range(1.0..3.0);
                let offset = rng.random_range(-0.5..0.5);
                MeasurementModel::power_law(gain, exponent, offset, 0.0, 0.01).unwrap()
            }
        })
        .collect();
    Geometry { models, positions, q }
}

/// Fourth-order central differences of the loss with respect to sensor `j`'s position.
pub fn fd_loss_grad(metric: &LossMetric, g: &Geometry, j: usize, delta: f64, h: f64) -> DVector<f64> {
    let k = g.q.len();
    let eval = |d: usize, t: f64| {
        let mut moved = g.positions.clone();
        moved[j][d] += t;
        loss(metric, &fim(&g.models, &moved, &g.q, delta).unwrap()).unwrap()
    };
    DVector::from_fn(k, |d, _| {
        (-eval(d, 2.0 * h) + 8.0 * eval(d, h) - 8.0 * eval(d, -h) + eval(d, -2.0 * h)) / (12.0 * h)
    })
}

/// `sum_j grad_q h_j (grad_q h_j)^T` with every gradient taken by central differences.
pub fn fd_fim(g: &Geometry, h: f64) -> DMatrix<f64> {
    let k = g.q.len();
    let mut out = DMatrix::zeros(k, k);
    for (m, p) in g.models.iter().zip(&g.positions) {
        let grad = DVector::from_fn(k, |d, _| {
            let mut plus = g.q.clone();
            let mut minus = g.q.clone();
            plus[d] += h;
            minus[d] -= h;
            (m.expected(p, &plus).unwrap() - m.expected(p, &minus).unwrap()) / (2.0 * h)
        });
        out += &grad * grad.transpose();
    }
    out
}

/// Planar rotation by `theta`, or a rotation about the z axis in 3-D.
pub fn rotation(dim: usize, theta: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(dim, dim);
    let (s, c) = theta.sin_cos();
    r[(0, 0)] = c;
    r[(0, 1)] = -s;
    r[(1, 0)] = s;
    r[(1, 1)] = c;
    r
}

/// Textbook Kalman filter in one-step predictor form for `y = C q + c0 + v`
/// and the constant-velocity transition.
pub fn reference_kf(
    z: &DVector<f64>,
    p: &DMatrix<f64>,
    q_noise: &DMatrix<f64>,
    c_pos: &DMatrix<f64>,
    c0: &DVector<f64>,
    r: f64,
    y: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let k = z.len() / 2;
    let m = y.len();
    let mut a = DMatrix::identity(2 * k, 2 * k);
    for i in 0..k {
        a[(i, k + i)] = 1.0;
    }
    let mut c = DMatrix::zeros(m, 2 * k);
    c.view_mut((0, 0), (m, k)).copy_from(c_pos);
    let s = &c * p * c.transpose() + DMatrix::identity(m, m) * r;
    let s_inv = s.clone().try_inverse().unwrap();
    let gain = &a * p * c.transpose() * s_inv;
    let innovation = y - (&c * z + c0);
    let z_next = &a * z + &gain * innovation;
    let p_next = &a * p * a.transpose() + q_noise - &gain * s * gain.transpose();
    (z_next, p_next)
}

pub fn random_metrics(rng: &mut ChaCha8Rng, dim: usize) -> Vec<LossMetric> {
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let p0_inv = &b * b.transpose() + DMatrix::identity(dim, dim) * 0.5;
    vec![
        LossMetric::TraceInv,
        LossMetric::LambdaMaxInv,
        LossMetric::NegLogDet,
        LossMetric::Covariance { p0_inv, r_scale: rng.random_range(0.01..2.0) },
    ]
}

/// Well-conditioned FIM with a clear eigen-gap, so differences are smooth.
pub fn usable(g: &Geometry) -> bool {
    let m = fim(&g.models, &g.positions, &g.q, DELTA).unwrap().matrix;
    let values = SymmetricEigen::new(m).eigenvalues;
    let (lo, hi) = (values.min(), values.max());
    let mut sorted: Vec<f64> = values.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    lo > 1e-4 * hi && (sorted[1] - sorted[0]) > 1e-3 * hi
}

/// Largest analytic-vs-difference gradient error over `configs` random geometries,
/// all four metrics each.
pub fn worst_gradient_error(dim: usize, configs: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < configs {
        let g = random_geometry(&mut r, dim, 0.8);
        if !usable(&g) {
            continue;
        }
        for metric in random_metrics(&mut r, dim) {
            let analytic = loss_grad_all(&metric, &g.models, &g.positions, &g.q, DELTA).unwrap();
            let fd: Vec<_> = (0..analytic.len()).map(|j| fd_loss_grad(&metric, &g, j, DELTA, 1e-3)).collect();
            // error relative to the configuration's gradient scale: a far sensor's
            // tiny gradient is below the difference quotient's resolution
            let scale = analytic.iter().map(|a| a.norm()).fold(1e-12, f64::max);
            for (a, f) in analytic.iter().zip(&fd) {
                worst = worst.max((a - f).norm() / scale);
            }
        }
        done += 1;
    }
    worst
}
