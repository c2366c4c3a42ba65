//! Trajectory loaders and the canonical CSV writer.
//!
//! Neither carrier format stores velocity, so loaders reconstruct it by
//! central finite differences of the positions (one-sided at the ends).

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::imu::{PoseState, Trajectory};
use crate::lie::Rotation;

pub const CANONICAL_TRAJECTORY_HEADER: &str = "t,px,py,pz,qx,qy,qz,qw";

/// KITTI ground-truth pose files carry no timestamps; frames are 10 Hz.
const KITTI_POSE_PERIOD: f64 = 0.1;

/// Source format of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryFormat {
    /// Canonical CSV, header `t,px,py,pz,qx,qy,qz,qw`.
    Canonical,
    /// KITTI odometry pose file: one row of 12 whitespace-separated values
    /// (row-major 3×4 `[R | t]`) per frame; timestamps assigned at 10 Hz.
    KittiPoses,
}

impl std::str::FromStr for TrajectoryFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(TrajectoryFormat::Canonical),
            "kitti_poses" => Ok(TrajectoryFormat::KittiPoses),
            other => Err(Error::invalid(format!(
                "unknown trajectory format `{other}`"
            ))),
        }
    }
}

/// Loads a trajectory and reconstructs per-pose velocities.
pub fn load_trajectory(path: &Path, format: TrajectoryFormat) -> Result<Trajectory> {
    let poses = match format {
        TrajectoryFormat::Canonical => load_canonical(path)?,
        TrajectoryFormat::KittiPoses => load_kitti_poses(path)?,
    };
    let poses = fill_velocities(poses);
    Trajectory::new(poses)
}

fn fill_velocities(mut poses: Vec<PoseState>) -> Vec<PoseState> {
    let n = poses.len();
    if n < 2 {
        return poses;
    }
    let diff = |a: &PoseState, b: &PoseState| (b.position - a.position) / (b.t - a.t);
    for i in 0..n {
        poses[i].velocity = if i == 0 {
            diff(&poses[0], &poses[1])
        } else if i == n - 1 {
            diff(&poses[n - 2], &poses[n - 1])
        } else {
            (poses[i + 1].position - poses[i - 1].position) / (poses[i + 1].t - poses[i - 1].t)
        };
    }
    poses
}

fn load_canonical(path: &Path) -> Result<Vec<PoseState>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| super::imu_io::csv_open_error(path, e))?;
    let names = ["t", "px", "py", "pz", "qx", "qy", "qz", "qw"];
    let mut poses = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(i + 1);
        if i == 0 {
            let header = record.iter().collect::<Vec<_>>().join(",");
            if header != CANONICAL_TRAJECTORY_HEADER {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected header `{CANONICAL_TRAJECTORY_HEADER}`, found `{header}`"),
                ));
            }
            continue;
        }
        if record.len() != 8 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 8 columns, found {}", record.len()),
            ));
        }
        let mut v = [0.0f64; 8];
        for (j, raw) in record.iter().enumerate() {
            v[j] = super::imu_io::parse_field(path, line, names[j], raw)?;
        }
        let q = [v[4], v[5], v[6], v[7]];
        let norm = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::parse(
                path,
                line,
                format!("quaternion norm {norm} outside 1 ± 1e-6"),
            ));
        }
        let rotation = Rotation::from_matrix(quaternion_to_matrix(q))
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        poses.push(PoseState::new(
            v[0],
            rotation,
            Vector3::zeros(),
            Vector3::new(v[1], v[2], v[3]),
        ));
    }
    Ok(poses)
}

fn load_kitti_poses(path: &Path) -> Result<Vec<PoseState>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 12 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 12 pose values, found {}", fields.len()),
            ));
        }
        let mut v = [0.0f64; 12];
        for (j, raw) in fields.iter().enumerate() {
            v[j] = super::imu_io::parse_field(path, i + 1, &format!("{j}"), raw)?;
        }
        let m = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let rotation = rotation_from_near_orthonormal(m)
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        poses.push(PoseState::new(
            poses.len() as f64 * KITTI_POSE_PERIOD,
            rotation,
            Vector3::zeros(),
            Vector3::new(v[3], v[7], v[11]),
        ));
    }
    Ok(poses)
}

/// Pose files are printed with limited precision, so accept matrices within
/// 1e-4 of SO(3) and project them onto the nearest rotation; reject anything
/// further off as corrupt.
fn rotation_from_near_orthonormal(m: Matrix3<f64>) -> Result<Rotation> {
    let defect = (m.transpose() * m - Matrix3::identity()).norm();
    if !defect.is_finite() || defect > 1e-4 || m.determinant() < 0.0 {
        return Err(Error::invalid(format!(
            "pose rotation is not orthonormal (defect {defect:.3e})"
        )));
    }
    if defect < crate::lie::ORTHONORMAL_TOL {
        return Rotation::from_matrix(m);
    }
    let svd = m.svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    Rotation::from_matrix(r)
}

/// Writes the canonical trajectory CSV (rotation as a unit quaternion with
/// positive `qw`, floats with 17 significant digits).
pub fn write_canonical_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{CANONICAL_TRAJECTORY_HEADER}").map_err(|e| Error::io(path, e))?;
    for p in traj.poses() {
        let [x, y, z, w] = matrix_to_quaternion(p.rotation.matrix());
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.t, p.position.x, p.position.y, p.position.z, x, y, z, w
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// `[x, y, z, w]` quaternion (assumed unit within 1e-6) to rotation matrix.
fn quaternion_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let norm = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let [x, y, z, w] = [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm];
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation matrix to `[x, y, z, w]` quaternion (Shepperd's method, `w >= 0`).
fn matrix_to_quaternion(m: &Matrix3<f64>) -> [f64; 4] {
    let tr = m.trace();
    let (x, y, z, w);
    if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    if w < 0.0 {
        [-x, -y, -z, -w]
    } else {
        [x, y, z, w]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::so3_exp;

    #[test]
    fn identity_pose_row_loads_as_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(
            &path,
            "t,px,py,pz,qx,qy,qz,qw\n0.0,0,0,0,0,0,0,1\n1.0,1,0,0,0,0,0,1\n",
        )
        .unwrap();
        let traj = load_trajectory(&path, TrajectoryFormat::Canonical).unwrap();
        assert_eq!(traj.poses()[0].rotation, Rotation::identity());
        assert_eq!(traj.poses()[0].position, Vector3::zeros());
        assert_eq!(traj.poses()[0].velocity, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn canonical_round_trip_preserves_poses() {
        let poses: Vec<PoseState> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.1;
                PoseState::new(
                    t,
                    so3_exp(&(Vector3::new(0.3, -0.5, 0.8) * t)),
                    Vector3::zeros(),
                    Vector3::new(t * 2.0, -t, t * t),
                )
            })
            .collect();
        let traj = Trajectory::new(poses).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_canonical_trajectory(&traj, &path).unwrap();
        let loaded = load_trajectory(&path, TrajectoryFormat::Canonical).unwrap();

        assert_eq!(loaded.len(), traj.len());
        for (a, b) in loaded.poses().iter().zip(traj.poses()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.position, b.position);
            assert!(
                (a.rotation.matrix() - b.rotation.matrix()).norm() < 1e-14,
                "rotation drifted by {:.3e}",
                (a.rotation.matrix() - b.rotation.matrix()).norm()
            );
        }

        // a second write/read cycle stays on the same poses (the quaternion
        // text can wobble in its last ulp, the values cannot)
        let second = dir.path().join("traj2.csv");
        write_canonical_trajectory(&loaded, &second).unwrap();
        let reloaded = load_trajectory(&second, TrajectoryFormat::Canonical).unwrap();
        for (a, b) in reloaded.poses().iter().zip(loaded.poses()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.position, b.position);
            assert!((a.rotation.matrix() - b.rotation.matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn canonical_rejects_denormalized_quaternion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(&path, "t,px,py,pz,qx,qy,qz,qw\n0.0,0,0,0,0,0,0,1.001\n").unwrap();
        assert!(load_trajectory(&path, TrajectoryFormat::Canonical).is_err());
    }

    #[test]
    fn kitti_pose_row_maps_translation_and_rotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        std::fs::write(&path, "1 0 0 1 0 1 0 2 0 0 1 3\n1 0 0 2 0 1 0 2 0 0 1 3\n").unwrap();
        let traj = load_trajectory(&path, TrajectoryFormat::KittiPoses).unwrap();
        assert_eq!(traj.poses()[0].position, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(traj.poses()[0].rotation, Rotation::identity());
        assert_eq!(traj.poses()[0].t, 0.0);
        assert_eq!(traj.poses()[1].t, KITTI_POSE_PERIOD);
    }

    #[test]
    fn kitti_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        std::fs::write(&path, "1 0 0 1 0 1\n").unwrap();
        assert!(load_trajectory(&path, TrajectoryFormat::KittiPoses).is_err());
    }

    #[test]
    fn quaternion_conversion_round_trips() {
        for theta in [
            Vector3::new(0.1, 0.2, 0.3),
            Vector3::new(3.0, 0.4, -0.2),
            Vector3::new(-2.8, 1.1, 0.6),
            Vector3::new(0.0, 0.0, 3.1),
        ] {
            let r = so3_exp(&theta);
            let q = matrix_to_quaternion(r.matrix());
            let back = quaternion_to_matrix(q);
            assert!(
                (back - r.matrix()).norm() < 1e-14,
                "round trip error {:.3e} at {theta:?}",
                (back - r.matrix()).norm()
            );
        }
    }
}
