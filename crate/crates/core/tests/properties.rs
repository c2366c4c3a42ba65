//! Property tests for the algebraic invariants.

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use preint_core::imu::{propagate_euler, propagate_exact, Gravity, ImuSample, PoseState};
use preint_core::lie::{gamma, hat, lambda, se3_exp, se3_log, so3_exp, so3_log, Twist};
use preint_core::oracle::{quadrature_gamma, quadrature_lambda};
use preint_core::preint::{apply, compose, preintegrate, Method};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

/// Rotation vector with norm in (1e-9, π - 0.05).
fn canonical_theta() -> impl Strategy<Value = Vector3<f64>> {
    (vec3(1.0), 1e-9..(std::f64::consts::PI - 0.05))
        .prop_filter_map("needs a usable axis", |(dir, angle)| {
            (dir.norm() > 1e-3).then(|| dir.normalize() * angle)
        })
}

fn stream(n: usize) -> impl Strategy<Value = Vec<ImuSample>> {
    prop::collection::vec((vec3(2.0), vec3(6.0)), n).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(k, (gyro, accel))| ImuSample::new(k as f64 * 0.01, gyro, accel))
            .collect()
    })
}

fn pose(t: f64, rot: Vector3<f64>, vel: Vector3<f64>, pos: Vector3<f64>) -> PoseState {
    PoseState::new(t, so3_exp(&rot), vel, pos)
}

proptest! {
    #[test]
    fn hat_and_vee_are_exact_inverses(v in vec3(100.0)) {
        let m = hat(&v).unwrap();
        prop_assert_eq!(preint_core::lie::vee(&m).unwrap(), v);
        prop_assert_eq!(m.transpose(), -m);
    }

    #[test]
    fn so3_round_trip(theta in canonical_theta()) {
        let back = so3_log(&so3_exp(&theta)).unwrap();
        prop_assert!((back - theta).norm() < 1e-9, "err {:.3e}", (back - theta).norm());
    }

    #[test]
    fn se3_round_trip(theta in canonical_theta(), rho in vec3(10.0)) {
        let xi = Twist::new(rho, theta);
        let back = se3_log(&se3_exp(&xi)).unwrap();
        prop_assert!((back.rho - xi.rho).norm() < 1e-9);
        prop_assert!((back.theta - xi.theta).norm() < 1e-9);
    }

    #[test]
    fn exp_produces_orthonormal_matrices(theta in vec3(10.0)) {
        let r = so3_exp(&theta);
        let defect = (r.matrix().transpose() * r.matrix() - Matrix3::identity()).norm();
        prop_assert!(defect < 1e-12);
        prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn correctives_match_their_quadratures(dir in vec3(1.0), scale in 0.0..3.0f64) {
        prop_assume!(dir.norm() > 1e-3);
        let theta = dir.normalize() * scale;
        // midpoint error bound at n = 1500: ‖θ‖²/(24n²) < 1.7e-7
        prop_assert!((gamma(&theta) - quadrature_gamma(&theta, 1500)).norm() < 5e-7);
        prop_assert!((lambda(&theta) - quadrature_lambda(&theta, 1500)).norm() < 5e-7);
    }

    #[test]
    fn separation_identity_holds_for_both_methods(
        samples in stream(20),
        rot in vec3(1.0),
        vel in vec3(3.0),
        pos in vec3(50.0),
        g_z in -12.0..0.0f64,
    ) {
        let g = Gravity(Vector3::new(0.0, 0.0, g_z));
        let state = pose(0.0, rot, vel, pos);
        for method in [Method::Forster, Method::Accurate] {
            let feature = preintegrate(&samples, 0.01, method).unwrap();
            let via = apply(&state, &feature, &g);
            let mut chained = state;
            for s in &samples {
                chained = match method {
                    Method::Forster => propagate_euler(&chained, s, 0.01, &g),
                    Method::Accurate => propagate_exact(&chained, s, 0.01, &g),
                };
            }
            prop_assert!((via.position - chained.position).norm() < 1e-10);
            prop_assert!((via.velocity - chained.velocity).norm() < 1e-10);
            prop_assert!(
                (via.rotation.matrix() - chained.rotation.matrix()).norm() < 1e-10
            );
        }
    }

    #[test]
    fn split_composition_matches_whole(samples in stream(24), split in 1usize..23) {
        for method in [Method::Forster, Method::Accurate] {
            let whole = preintegrate(&samples, 0.01, method).unwrap();
            let left = preintegrate(&samples[..split], 0.01, method).unwrap();
            let right = preintegrate(&samples[split..], 0.01, method).unwrap();
            let joined = compose(&left, &right).unwrap();
            prop_assert!((joined.delta_p - whole.delta_p).norm() < 1e-10);
            prop_assert!((joined.delta_v - whole.delta_v).norm() < 1e-10);
            prop_assert!(
                (joined.delta_r.matrix() - whole.delta_r.matrix()).norm() < 1e-10
            );
        }
    }

    #[test]
    fn rotation_part_is_method_independent(samples in stream(16)) {
        let forster = preintegrate(&samples, 0.01, Method::Forster).unwrap();
        let accurate = preintegrate(&samples, 0.01, Method::Accurate).unwrap();
        prop_assert_eq!(forster.delta_r.matrix(), accurate.delta_r.matrix());
    }

    #[test]
    fn preintegration_ignores_hypothetical_initial_state(samples in stream(12)) {
        // the constraint is a pure function of the samples
        let a = preintegrate(&samples, 0.01, Method::Accurate).unwrap();
        let b = preintegrate(&samples, 0.01, Method::Accurate).unwrap();
        prop_assert_eq!(a.delta_r.matrix(), b.delta_r.matrix());
        prop_assert_eq!(a.delta_v, b.delta_v);
        prop_assert_eq!(a.delta_p, b.delta_p);
    }
}
