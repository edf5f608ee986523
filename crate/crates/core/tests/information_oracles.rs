mod common;

use common::{fd_fim, pos, random_geometry, rng, rotation, worst_gradient_error, DELTA};
use infoseek::information::{fim, loss, loss_grad, loss_grad_all, prop1_bound_check, LossMetric};
use infoseek::measurement::MeasurementModel;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

#[test]
fn gradient_matches_finite_differences_in_the_plane() {
    let worst = worst_gradient_error(2, 100, 1);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn gradient_matches_finite_differences_in_space() {
    let worst = worst_gradient_error(3, 100, 2);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn single_sensor_gradient_agrees_with_batch() {
    let mut r = rng(3);
    let g = random_geometry(&mut r, 2, 0.8);
    let all = loss_grad_all(&LossMetric::TraceInv, &g.models, &g.positions, &g.q, 1e-3).unwrap();
    for (j, a) in all.iter().enumerate() {
        let one = loss_grad(&LossMetric::TraceInv, &g.models, &g.positions, &g.q, j, 1e-3).unwrap();
        assert_eq!(&one, a);
    }
}

#[test]
fn closed_form_fim_matches_jacobian_product() {
    for dim in [2, 3] {
        let mut r = rng(10 + dim as u64);
        for _ in 0..100 {
            let g = random_geometry(&mut r, dim, 1.0);
            let closed = fim(&g.models, &g.positions, &g.q, 0.0).unwrap().matrix;
            let fd = fd_fim(&g, 1e-5);
            let err = (closed - fd).amax();
            assert!(err <= 1e-5, "dim {dim}: entrywise error {err:e}");
        }
    }
}

#[test]
fn equiangular_sensors_give_isotropic_fim() {
    // three unit-range sensors 120 degrees apart: FIM = (3/2) g'^2 I
    let model = MeasurementModel::inverse_square(0.01);
    let q = pos(&[1.0, -1.0]);
    let positions: Vec<_> = (0..3)
        .map(|i| {
            let t = i as f64 * 2.0 * std::f64::consts::PI / 3.0;
            pos(&[1.0 + t.cos(), -1.0 + t.sin()])
        })
        .collect();
    let m = fim(&vec![model; 3], &positions, &q, 0.0).unwrap().matrix;
    let expected = DMatrix::identity(2, 2) * 6.0; // g'(1) = -2
    assert!((m - expected).amax() < 1e-12);
}

#[test]
fn prop1_bound_holds_on_random_geometries() {
    let mut r = rng(20);
    for _ in 0..200 {
        let g = random_geometry(&mut r, 2, 0.5);
        let report = prop1_bound_check(&g.models, &g.positions, &g.q, 0.0).unwrap();
        if !report.degenerate {
            assert!(report.satisfied, "{report:?}");
        }
    }
}

proptest! {
    #[test]
    fn rigid_motion_rotates_fim_and_keeps_losses(seed in 0u64..10_000, theta in -3.2f64..3.2, shift in prop::array::uniform2(-5.0f64..5.0)) {
        let mut r = rng(seed);
        let g = random_geometry(&mut r, 2, 0.8);
        let rot = rotation(2, theta);
        let t = pos(&shift);
        let moved: Vec<_> = g.positions.iter().map(|p| &rot * p + &t).collect();
        let q_moved = &rot * &g.q + &t;
        let m = fim(&g.models, &g.positions, &g.q, DELTA).unwrap();
        let m_moved = fim(&g.models, &moved, &q_moved, DELTA).unwrap();
        let rotated = &rot * &m.matrix * rot.transpose();
        prop_assert!((&m_moved.matrix - &rotated).amax() <= 1e-9 * m.matrix.amax().max(1.0));
        for metric in [LossMetric::TraceInv, LossMetric::NegLogDet] {
            let a = loss(&metric, &m).unwrap();
            let b = loss(&metric, &m_moved).unwrap();
            prop_assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0));
        }
        let grads = loss_grad_all(&LossMetric::TraceInv, &g.models, &g.positions, &g.q, DELTA);
        let grads_moved = loss_grad_all(&LossMetric::TraceInv, &g.models, &moved, &q_moved, DELTA);
        if let (Ok(a), Ok(b)) = (grads, grads_moved) {
            for (ga, gb) in a.iter().zip(&b) {
                let expected = &rot * ga;
                prop_assert!((gb - &expected).norm() <= 1e-6 * expected.norm().max(1e-9));
            }
        }
    }

    #[test]
    fn fim_is_symmetric_psd(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let g = random_geometry(&mut r, 3, 0.3);
        let m = fim(&g.models, &g.positions, &g.q, 0.0).unwrap().matrix;
        prop_assert_eq!(&m, &m.transpose());
        let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
        prop_assert!(min >= -1e-12 * m.amax().max(1.0));
    }
}
