//! Minimal end-to-end tour of the library API: simulate a motion, window it
//! into PI features with both formulations, and look at what separates them.
//!
//! Run with: cargo run --example quickstart

use nalgebra::Vector3;
use preint_core::dataset::{interpolate_pose, make_labels};
use preint_core::eval::{empirical_covariance, geodesic_residual, weighted_loss};
use preint_core::imu::{simulate_trajectory, Gravity, MotionSegment, PoseState};
use preint_core::lie::se3_log;
use preint_core::preint::{apply, preintegrate, window_features, Method};

fn main() {
    // a 10 s turn with sustained body-frame acceleration, sampled at 100 Hz
    let segments = [MotionSegment {
        duration: 10.0,
        gyro: Vector3::new(0.4, -0.3, 0.9),
        accel: Vector3::new(1.2, -0.4, 0.5),
    }];
    let g = Gravity::standard();
    let (trajectory, samples) =
        simulate_trajectory(&segments, &PoseState::origin(0.0), 100.0, &g).unwrap();
    println!(
        "simulated {} samples over {:.1} s",
        samples.len(),
        trajectory.end_time()
    );

    // 200-sample windows advancing by 10 samples, one feature per 10 samples
    let windows = window_features(&samples, 200, 10, Method::Accurate).unwrap();
    println!(
        "{} windows of {} features each",
        windows.len(),
        windows[0].features.len()
    );

    // the two formulations diverge on the position constraint as rotation
    // per interval grows
    let dt = 0.01;
    let forster = preintegrate(&samples[..10], dt, Method::Forster).unwrap();
    let accurate = preintegrate(&samples[..10], dt, Method::Accurate).unwrap();
    println!(
        "Δp gap between formulations over one 10-sample step: {:.3e} m",
        (forster.delta_p - accurate.delta_p).norm()
    );

    // applying a feature to the pose at its start lands on the simulated pose
    let start = trajectory.poses()[0];
    let reached = apply(&start, &windows[0].features[0], &g);
    let truth = trajectory.poses()[10];
    println!(
        "feature vs simulated trajectory after one step: {:.3e} m",
        (reached.position - truth.position).norm()
    );

    // odometry labels every 10 samples, and the loss of perfect predictions
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
    let labels = make_labels(&trajectory, &times).unwrap();
    let weights = empirical_covariance(&labels).unwrap();
    let residuals: Vec<_> = labels
        .iter()
        .map(|l| geodesic_residual(&l.delta, &se3_log(&l.delta).unwrap()).unwrap())
        .collect();
    println!(
        "geodesic loss of exact predictions: {:.3e}",
        weighted_loss(&residuals, &weights)
    );

    // ground truth can be queried between poses
    let mid = interpolate_pose(&trajectory, 5.005).unwrap();
    println!("pose at t = 5.005 s: p = {:.3?}", mid.position);
}
