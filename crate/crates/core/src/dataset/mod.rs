//! Dataset ingestion, ground-truth alignment, feature export, and the
//! dynamic-acceleration CDF.
//!
//! Two canonical CSV formats act as the interchange layer:
//!
//! - IMU: header `t,gx,gy,gz,ax,ay,az` (s, rad/s, m/s²)
//! - trajectory: header `t,px,py,pz,qx,qy,qz,qw` (s, m, unit quaternion
//!   world ← body)
//!
//! Floats are written with 17 significant digits so write-then-read is exact.
//! Adapters for KITTI (OXTS directories, pose files) and OxfordIO CSV map
//! those sources onto the same in-memory types. Loaders reject corrupt data
//! (non-monotone time, non-finite values) with source locations instead of
//! repairing it; the only silent cleanup is dropping byte-identical duplicate
//! rows in the adapter formats.

mod imu_io;
mod traj_io;

pub use imu_io::{load_imu, write_canonical_imu, ImuFormat, ImuStream};
pub use traj_io::{load_trajectory, write_canonical_trajectory, TrajectoryFormat};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::imu::{Gravity, ImuSample, PoseState, Trajectory};
use crate::lie::{se3_log, so3_exp, so3_log, Transform};
use crate::preint::FeatureWindow;

/// Relative ground-truth motion between two step boundaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdometryLabel {
    pub delta: Transform,
    pub t_i: f64,
    pub t_j: f64,
}

/// Pose at an arbitrary time inside the trajectory span.
///
/// Position interpolates linearly, rotation geodesically
/// (`R_a·exp(s·log(R_aᵀR_b))`), and velocity is the finite difference of the
/// bracketing positions. A query exactly on a knot returns that knot's pose.
pub fn interpolate_pose(traj: &Trajectory, t: f64) -> Result<PoseState> {
    let poses = traj.poses();
    if !t.is_finite() || t < traj.start_time() || t > traj.end_time() {
        return Err(Error::OutOfRange(format!(
            "t = {t} outside trajectory span [{}, {}]",
            traj.start_time(),
            traj.end_time()
        )));
    }
    let idx = poses.partition_point(|p| p.t <= t);
    if poses[idx - 1].t == t {
        return Ok(poses[idx - 1]);
    }
    let (a, b) = (&poses[idx - 1], &poses[idx]);
    let span = b.t - a.t;
    let s = (t - a.t) / span;
    let delta = so3_log(&(&a.rotation.inverse() * &b.rotation))?;
    Ok(PoseState {
        t,
        rotation: &a.rotation * &so3_exp(&(delta * s)),
        velocity: (b.position - a.position) / span,
        position: a.position + (b.position - a.position) * s,
    })
}

/// Builds relative-pose labels `ΔT = T(t_i)⁻¹·T(t_j)` over consecutive step
/// boundaries.
pub fn make_labels(traj: &Trajectory, step_times: &[f64]) -> Result<Vec<OdometryLabel>> {
    if step_times.len() < 2 {
        return Err(Error::invalid(
            "make_labels: need at least two step boundaries",
        ));
    }
    let mut labels = Vec::with_capacity(step_times.len() - 1);
    let mut prev = interpolate_pose(traj, step_times[0])?.transform();
    for pair in step_times.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid(format!(
                "make_labels: step times not increasing at t = {}",
                pair[1]
            )));
        }
        let next = interpolate_pose(traj, pair[1])?.transform();
        labels.push(OdometryLabel {
            delta: &prev.inverse() * &next,
            t_i: pair[0],
            t_j: pair[1],
        });
        prev = next;
    }
    Ok(labels)
}

/// Header of the feature-export CSV.
pub const FEATURE_EXPORT_HEADER: &str = "window_id,step_id,dr_x,dr_y,dr_z,dv_x,dv_y,dv_z,dp_x,dp_y,dp_z,dt,label_rho_x,label_rho_y,label_rho_z,label_theta_x,label_theta_y,label_theta_z";

/// Writes one CSV row per (window, step), pairing each PI feature with the
/// odometry label of its chunk. Returns the number of rows written.
///
/// `windows` must come from `window_features` (windows advance by one chunk);
/// `labels` is indexed by chunk, so its length must be
/// `n_windows + steps_per_window - 1`. ΔR is stored as a rotation vector.
pub fn export_features(
    windows: &[FeatureWindow],
    labels: &[OdometryLabel],
    path: &std::path::Path,
) -> Result<usize> {
    use std::io::Write;

    let expected = if windows.is_empty() {
        0
    } else {
        windows.len() + windows[0].features.len() - 1
    };
    if labels.len() != expected {
        return Err(Error::invalid(format!(
            "export_features: {} labels for {} distinct features",
            labels.len(),
            expected
        )));
    }

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut rows = 0usize;
    writeln!(out, "{FEATURE_EXPORT_HEADER}").map_err(|e| Error::io(path, e))?;

    for (w, window) in windows.iter().enumerate() {
        for (s, feature) in window.features.iter().enumerate() {
            let label = &labels[w + s];
            if (label.t_i - feature.t_start).abs() > crate::preint::TIME_JITTER_TOL {
                return Err(Error::invalid(format!(
                    "export_features: label {} starts at {:.9} but feature starts at {:.9}",
                    w + s,
                    label.t_i,
                    feature.t_start
                )));
            }
            let dr = so3_log(&feature.delta_r)?;
            let xi = se3_log(&label.delta)?;
            let fields: Vec<String> = [
                dr.x,
                dr.y,
                dr.z,
                feature.delta_v.x,
                feature.delta_v.y,
                feature.delta_v.z,
                feature.delta_p.x,
                feature.delta_p.y,
                feature.delta_p.z,
                feature.dt,
                xi.rho.x,
                xi.rho.y,
                xi.rho.z,
                xi.theta.x,
                xi.theta.y,
                xi.theta.z,
            ]
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect();
            writeln!(out, "{w},{s},{}", fields.join(",")).map_err(|e| Error::io(path, e))?;
            rows += 1;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// Empirical CDF of the dynamic-acceleration magnitude `‖R·ã + g‖`.
///
/// The gravity-free acceleration needs the ground-truth orientation at each
/// sample time, so the trajectory must cover the stream. Returns 100 evenly
/// spaced thresholds from 0 to the maximum with their cumulative fractions;
/// the last entry is always (max, 1.0).
pub fn acceleration_cdf(
    samples: &[ImuSample],
    g: &Gravity,
    traj: &Trajectory,
) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::invalid("acceleration_cdf: empty stream"));
    }
    let first = samples[0].t;
    let last = samples[samples.len() - 1].t;
    if first < traj.start_time() || last > traj.end_time() {
        return Err(Error::OutOfRange(format!(
            "acceleration_cdf: stream [{first}, {last}] not covered by trajectory [{}, {}]",
            traj.start_time(),
            traj.end_time()
        )));
    }

    let mut norms: Vec<f64> = Vec::with_capacity(samples.len());
    for s in samples {
        let pose = interpolate_pose(traj, s.t)?;
        let dynamic: Vector3<f64> = pose.rotation.apply(&s.accel) + g.0;
        norms.push(dynamic.norm());
    }
    norms.sort_by(f64::total_cmp);
    let max = *norms.last().unwrap();

    let n = norms.len() as f64;
    let mut cdf = Vec::with_capacity(100);
    for i in 0..100 {
        let threshold = if max > 0.0 {
            max * i as f64 / 99.0
        } else {
            0.0
        };
        let count = norms.partition_point(|&x| x <= threshold);
        cdf.push((threshold, count as f64 / n));
    }
    // guard against max*99/99 rounding below the true maximum
    cdf[99] = (max, 1.0);
    Ok(cdf)
}

/// Smallest threshold whose cumulative fraction reaches `q` (0 < q ≤ 1).
pub fn cdf_percentile(cdf: &[(f64, f64)], q: f64) -> Option<f64> {
    cdf.iter().find(|(_, frac)| *frac >= q).map(|(thr, _)| *thr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::{simulate_trajectory, MotionSegment};
    use crate::lie::Rotation;
    use crate::preint::{window_features, Method};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn straight_trajectory(n: usize, dt: f64, v: Vector3<f64>) -> Trajectory {
        let poses = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                PoseState::new(t, Rotation::identity(), v, v * t)
            })
            .collect();
        Trajectory::new(poses).unwrap()
    }

    #[test]
    fn interpolation_at_knot_is_exact() {
        let traj = straight_trajectory(11, 0.1, Vector3::new(1.0, 0.0, 0.0));
        let p = interpolate_pose(&traj, 0.5).unwrap();
        assert_eq!(p, traj.poses()[5]);
    }

    #[test]
    fn interpolation_geodesic_midpoint() {
        let a = PoseState::new(
            0.0,
            Rotation::identity(),
            Vector3::zeros(),
            Vector3::zeros(),
        );
        let b = PoseState::new(
            1.0,
            so3_exp(&Vector3::new(0.0, 0.0, FRAC_PI_2)),
            Vector3::zeros(),
            Vector3::zeros(),
        );
        let traj = Trajectory::new(vec![a, b]).unwrap();
        let mid = interpolate_pose(&traj, 0.5).unwrap();
        let expected = so3_exp(&Vector3::new(0.0, 0.0, FRAC_PI_2 / 2.0));
        assert_relative_eq!(*mid.rotation.matrix(), *expected.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn interpolation_reproduces_constant_velocity_motion() {
        let v = Vector3::new(0.8, -0.2, 0.1);
        let traj = straight_trajectory(21, 0.05, v);
        for &t in &[0.013, 0.5211, 0.987] {
            let p = interpolate_pose(&traj, t).unwrap();
            assert_relative_eq!(p.position, v * t, epsilon = 1e-9);
            assert_relative_eq!(p.velocity, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn interpolation_rejects_out_of_span() {
        let traj = straight_trajectory(5, 0.1, Vector3::zeros());
        assert!(matches!(
            interpolate_pose(&traj, -0.1),
            Err(Error::OutOfRange(_))
        ));
        assert!(interpolate_pose(&traj, 0.5).is_err());
        assert!(interpolate_pose(&traj, f64::NAN).is_err());
    }

    #[test]
    fn labels_of_stationary_trajectory_are_identity() {
        let poses = (0..10).map(|k| PoseState::origin(k as f64 * 0.1)).collect();
        let traj = Trajectory::new(poses).unwrap();
        let labels = make_labels(&traj, &[0.0, 0.3, 0.6, 0.9]).unwrap();
        assert_eq!(labels.len(), 3);
        for l in labels {
            assert!(l.delta.translation.norm() < 1e-15);
            assert!((l.delta.rotation.matrix() - nalgebra::Matrix3::identity()).norm() < 1e-15);
        }
    }

    #[test]
    fn labels_of_constant_velocity_motion() {
        let v = Vector3::new(2.0, 0.0, -1.0);
        let traj = straight_trajectory(21, 0.05, v);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let labels = make_labels(&traj, &times).unwrap();
        for l in &labels {
            assert_relative_eq!(l.delta.translation, v * 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn labels_compose_to_window_relative_transform() {
        let seg = MotionSegment {
            duration: 2.0,
            gyro: Vector3::new(0.3, -0.2, 0.5),
            accel: Vector3::new(1.0, 0.5, -0.5),
        };
        let (traj, _) =
            simulate_trajectory(&[seg], &PoseState::origin(0.0), 100.0, &Gravity::zero()).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let labels = make_labels(&traj, &times).unwrap();
        let mut acc = Transform::identity();
        for l in &labels {
            acc = &acc * &l.delta;
        }
        let start = interpolate_pose(&traj, 0.0).unwrap().transform();
        let end = interpolate_pose(&traj, 2.0).unwrap().transform();
        let whole = &start.inverse() * &end;
        assert!((acc.translation - whole.translation).norm() < 1e-9);
        assert!((acc.rotation.matrix() - whole.rotation.matrix()).norm() < 1e-9);
    }

    #[test]
    fn export_writes_header_only_for_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let rows = export_features(&[], &[], &path).unwrap();
        assert_eq!(rows, 0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim(), FEATURE_EXPORT_HEADER);
    }

    #[test]
    fn export_one_window_yields_twenty_rows() {
        let seg = MotionSegment {
            duration: 2.0,
            gyro: Vector3::new(0.1, 0.2, -0.1),
            accel: Vector3::new(0.5, -0.25, 1.0),
        };
        let (traj, samples) =
            simulate_trajectory(&[seg], &PoseState::origin(0.0), 100.0, &Gravity::zero()).unwrap();
        let windows = window_features(&samples, 200, 10, Method::Accurate).unwrap();
        assert_eq!(windows.len(), 1);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let labels = make_labels(&traj, &times).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let rows = export_features(&windows, &labels, &path).unwrap();
        assert_eq!(rows, 20);

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 21);
        assert!(lines[1..].iter().all(|l| l.starts_with("0,")));

        // reload reproduces the features at CSV precision
        for (s, line) in lines[1..].iter().enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .skip(2)
                .map(|f| f.parse().unwrap())
                .collect();
            let f = &windows[0].features[s];
            let dr = so3_log(&f.delta_r).unwrap();
            assert_relative_eq!(Vector3::new(fields[0], fields[1], fields[2]), dr);
            assert_relative_eq!(Vector3::new(fields[3], fields[4], fields[5]), f.delta_v);
            assert_relative_eq!(Vector3::new(fields[6], fields[7], fields[8]), f.delta_p);
            assert_eq!(fields[9], f.dt);
        }
    }

    #[test]
    fn export_rejects_label_count_mismatch() {
        let seg = MotionSegment {
            duration: 2.0,
            gyro: Vector3::zeros(),
            accel: Vector3::zeros(),
        };
        let (traj, samples) =
            simulate_trajectory(&[seg], &PoseState::origin(0.0), 100.0, &Gravity::zero()).unwrap();
        let windows = window_features(&samples, 200, 10, Method::Forster).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let labels = make_labels(&traj, &times).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = export_features(&windows, &labels, &dir.path().join("f.csv"));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cdf_of_stationary_stream_is_a_step_at_zero() {
        let seg = MotionSegment {
            duration: 1.0,
            gyro: Vector3::zeros(),
            accel: Vector3::zeros(),
        };
        let (traj, samples) =
            simulate_trajectory(&[seg], &PoseState::origin(0.0), 100.0, &Gravity::standard())
                .unwrap();
        let cdf = acceleration_cdf(&samples, &Gravity::standard(), &traj).unwrap();
        assert_eq!(cdf.len(), 100);
        for (thr, frac) in &cdf {
            assert!(*thr < 1e-12);
            assert_eq!(*frac, 1.0);
        }
    }

    #[test]
    fn cdf_of_constant_dynamic_acceleration_steps_at_its_value() {
        // circular motion: ‖a_dyn‖ = 2 everywhere
        let seg = MotionSegment {
            duration: 3.0,
            gyro: Vector3::new(0.0, 0.0, 1.0),
            accel: Vector3::new(2.0, 0.0, 0.0),
        };
        let initial = PoseState::new(
            0.0,
            Rotation::identity(),
            Vector3::new(0.0, -2.0, 0.0),
            Vector3::zeros(),
        );
        let (traj, samples) =
            simulate_trajectory(&[seg], &initial, 100.0, &Gravity::zero()).unwrap();
        let cdf = acceleration_cdf(&samples, &Gravity::zero(), &traj).unwrap();
        assert_relative_eq!(cdf[99].0, 2.0, epsilon = 1e-9);
        assert_eq!(cdf[99].1, 1.0);
        assert_eq!(cdf[50].1, 0.0);
        assert_eq!(cdf_percentile(&cdf, 0.9), Some(2.0));
    }

    #[test]
    fn cdf_rejects_uncovered_stream() {
        let traj = straight_trajectory(5, 0.1, Vector3::zeros());
        let samples = vec![ImuSample::new(1.5, Vector3::zeros(), Vector3::zeros())];
        assert!(matches!(
            acceleration_cdf(&samples, &Gravity::zero(), &traj),
            Err(Error::OutOfRange(_))
        ));
    }
}
