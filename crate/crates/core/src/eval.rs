//! Trajectory error metrics and the geodesic training loss.
//!
//! Both benchmark metrics operate on index-aligned pose sequences: the
//! KITTI relative errors average translation (%) and rotation (deg/m) over
//! every sub-sequence of 100–800 m ground-truth path length, and the
//! normalized displacement error compares batch displacements for
//! pedestrian-style data. The loss side provides the geodesic residual
//! `Φ = log(ΔT*⁻¹ exp(ξ^))∨`, its Σ⁻¹-weighted quadratic form, and the
//! empirical covariance estimator that produces Σ⁻¹ from training labels.

use nalgebra::{Matrix6, Vector3, Vector6};
use rayon::prelude::*;

use crate::dataset::OdometryLabel;
use crate::error::{Error, Result};
use crate::imu::{PoseState, Trajectory};
use crate::lie::{se3_exp, se3_log, Rotation, Transform, Twist};

/// Sub-sequence lengths (m) of the KITTI benchmark.
pub const KITTI_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

/// Ground-truth displacements below this are skipped by the displacement
/// metric (m).
pub const MIN_DISPLACEMENT: f64 = 0.01;

/// One (start frame, length) evaluation of the KITTI metric.
#[derive(Clone, Copy, Debug)]
pub struct SubsequenceError {
    pub start: usize,
    pub length_m: f64,
    pub t_err_pct: f64,
    pub r_err_deg_per_m: f64,
}

/// Averaged KITTI-style relative errors plus the per-sub-sequence details.
///
/// An input too short to produce a single sub-sequence yields an empty
/// `details` list with zero averages — check [`RelErrorReport::is_empty`].
#[derive(Clone, Debug)]
pub struct RelErrorReport {
    pub t_rel_pct: f64,
    pub r_rel_deg_per_m: f64,
    pub details: Vec<SubsequenceError>,
}

impl RelErrorReport {
    pub fn is_empty(&self) -> bool {
        self.details.is_empty()
    }

    /// Summary CSV matching the benchmark table layout.
    pub fn to_csv(&self, seq: &str) -> String {
        format!(
            "seq,t_rel(%),r_rel(deg/m)\n{seq},{:.6},{:.8}\navg.,{:.6},{:.8}\n",
            self.t_rel_pct, self.r_rel_deg_per_m, self.t_rel_pct, self.r_rel_deg_per_m
        )
    }

    /// Human-readable table with the same columns.
    pub fn table(&self, seq: &str) -> String {
        format!(
            "{:<12}{:>12}{:>16}\n{:<12}{:>12.4}{:>16.6}\n{:<12}{:>12.4}{:>16.6}\n",
            "seq",
            "t_rel(%)",
            "r_rel(deg/m)",
            seq,
            self.t_rel_pct,
            self.r_rel_deg_per_m,
            "avg.",
            self.t_rel_pct,
            self.r_rel_deg_per_m
        )
    }
}

/// Normalized displacement error over fixed-size batches.
#[derive(Clone, Copy, Debug)]
pub struct DisplacementReport {
    pub error_pct: f64,
    pub batches_used: usize,
    pub batches_skipped: usize,
}

impl DisplacementReport {
    pub fn to_csv(&self, seq: &str) -> String {
        format!(
            "seq,error(%)\n{seq},{:.6}\naverage,{:.6}\n",
            self.error_pct, self.error_pct
        )
    }

    pub fn table(&self, seq: &str) -> String {
        format!(
            "{:<16}{:>12}\n{:<16}{:>12.4}\n{:<16}{:>12.4}\n",
            "seq", "error(%)", seq, self.error_pct, "average", self.error_pct
        )
    }
}

/// Σ⁻¹ for the geodesic loss; validated symmetric positive-definite.
#[derive(Clone, Debug)]
pub struct LossWeights {
    sigma_inv: Matrix6<f64>,
}

impl LossWeights {
    /// Wraps an information matrix, rejecting asymmetry beyond 1e-9 or
    /// non-positive eigenvalues.
    pub fn new(sigma_inv: Matrix6<f64>) -> Result<Self> {
        let asym = (sigma_inv - sigma_inv.transpose()).norm();
        if !asym.is_finite() || asym >= 1e-9 {
            return Err(Error::invalid(format!(
                "loss weights must be symmetric (‖Σ⁻¹-Σ⁻ᵀ‖ = {asym:.3e})"
            )));
        }
        if sigma_inv.clone_owned().cholesky().is_none() {
            return Err(Error::invalid("loss weights must be positive definite"));
        }
        Ok(LossWeights { sigma_inv })
    }

    pub fn identity() -> Self {
        LossWeights {
            sigma_inv: Matrix6::identity(),
        }
    }

    pub fn sigma_inv(&self) -> &Matrix6<f64> {
        &self.sigma_inv
    }
}

/// Chains relative-pose predictions from a starting state: `T_k = T_{k-1}·ΔT_k`.
///
/// The deltas must be contiguous (each `t_j` is the next `t_i`); velocities
/// are reconstructed by finite differences of consecutive positions.
pub fn integrate_predictions(start: &PoseState, deltas: &[OdometryLabel]) -> Result<Trajectory> {
    let mut poses = Vec::with_capacity(deltas.len() + 1);
    poses.push(*start);
    let mut current = start.transform();
    let mut t_prev = start.t;
    for d in deltas {
        current = &current * &d.delta;
        let velocity = (current.translation - poses.last().unwrap().position) / (d.t_j - t_prev);
        poses.push(PoseState::new(
            d.t_j,
            current.rotation,
            velocity,
            current.translation,
        ));
        t_prev = d.t_j;
    }
    Trajectory::new(poses)
}

fn rotation_angle(r: &Rotation) -> f64 {
    let m = r.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = Vector3::new(
        (m[(2, 1)] - m[(1, 2)]) * 0.5,
        (m[(0, 2)] - m[(2, 0)]) * 0.5,
        (m[(1, 0)] - m[(0, 1)]) * 0.5,
    )
    .norm();
    sin.atan2(cos)
}

/// Averaged relative translation/rotation errors over all sub-sequences of
/// the given ground-truth path lengths.
///
/// For every start frame and length `L`, the end frame is the first whose
/// accumulated ground-truth path length reaches `L`; the error transform is
/// `E = (gt_i⁻¹ gt_j)⁻¹ (pred_i⁻¹ pred_j)`, scored as `‖trans(E)‖/L·100` (%)
/// and `angle(rot(E))/L` (deg/m).
pub fn kitti_relative_errors(
    pred: &Trajectory,
    gt: &Trajectory,
    lengths: &[f64],
) -> Result<RelErrorReport> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "kitti_relative_errors: trajectories differ in length ({} vs {})",
            pred.len(),
            gt.len()
        )));
    }
    if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid("kitti_relative_errors: bad length list"));
    }

    let n = gt.len();
    let mut dist = Vec::with_capacity(n);
    let mut acc = 0.0;
    dist.push(0.0);
    for pair in gt.poses().windows(2) {
        acc += (pair[1].position - pair[0].position).norm();
        dist.push(acc);
    }

    // Deterministic parallel evaluation: per-start vectors collected in
    // order, then flattened sequentially.
    let per_start: Vec<Vec<SubsequenceError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut found = Vec::new();
            for &length in lengths {
                let target = dist[i] + length;
                let j = dist.partition_point(|&d| d < target);
                if j >= n {
                    continue;
                }
                let gt_rel = &gt.poses()[i].transform().inverse() * &gt.poses()[j].transform();
                let pred_rel =
                    &pred.poses()[i].transform().inverse() * &pred.poses()[j].transform();
                let error = &gt_rel.inverse() * &pred_rel;
                found.push(SubsequenceError {
                    start: i,
                    length_m: length,
                    t_err_pct: error.translation.norm() / length * 100.0,
                    r_err_deg_per_m: rotation_angle(&error.rotation).to_degrees() / length,
                });
            }
            found
        })
        .collect();

    let details: Vec<SubsequenceError> = per_start.into_iter().flatten().collect();
    let count = details.len() as f64;
    let (t_sum, r_sum) = details.iter().fold((0.0, 0.0), |(t, r), e| {
        (t + e.t_err_pct, r + e.r_err_deg_per_m)
    });
    Ok(RelErrorReport {
        t_rel_pct: if details.is_empty() {
            0.0
        } else {
            t_sum / count
        },
        r_rel_deg_per_m: if details.is_empty() {
            0.0
        } else {
            r_sum / count
        },
        details,
    })
}

/// Mean displacement error over non-overlapping batches of `batch_samples`
/// IMU samples (`batch_samples / samples_per_step` pose steps each):
///
/// ```text
/// e = ‖(p̂_end - p̂_start) - (p_end - p_start)‖ / ‖p_end - p_start‖ · 100
/// ```
///
/// Batches whose ground-truth displacement is under 1 cm are skipped and
/// counted; it is an error if nothing remains.
pub fn normalized_displacement_error(
    pred: &Trajectory,
    gt: &Trajectory,
    batch_samples: usize,
    samples_per_step: usize,
) -> Result<DisplacementReport> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "normalized_displacement_error: trajectories differ in length ({} vs {})",
            pred.len(),
            gt.len()
        )));
    }
    if samples_per_step == 0 || batch_samples == 0 || batch_samples % samples_per_step != 0 {
        return Err(Error::invalid(
            "normalized_displacement_error: batch must be a positive multiple of the step",
        ));
    }
    let steps_per_batch = batch_samples / samples_per_step;
    let n_batches = (gt.len().saturating_sub(1)) / steps_per_batch;

    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut sum = 0.0;
    for b in 0..n_batches {
        let (i, j) = (b * steps_per_batch, (b + 1) * steps_per_batch);
        let gt_disp = gt.poses()[j].position - gt.poses()[i].position;
        if gt_disp.norm() < MIN_DISPLACEMENT {
            skipped += 1;
            continue;
        }
        let pred_disp = pred.poses()[j].position - pred.poses()[i].position;
        sum += (pred_disp - gt_disp).norm() / gt_disp.norm() * 100.0;
        used += 1;
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(format!(
            "displacement error undefined: {n_batches} batches, all below {MIN_DISPLACEMENT} m"
        )));
    }
    Ok(DisplacementReport {
        error_pct: sum / used as f64,
        batches_used: used,
        batches_skipped: skipped,
    })
}

/// Geodesic residual `Φ = log(label⁻¹ · exp(ξ))∨` as `[ρ, θ]`.
pub fn geodesic_residual(label: &Transform, prediction: &Twist) -> Result<Vector6<f64>> {
    let discrepancy = &label.inverse() * &se3_exp(prediction);
    Ok(se3_log(&discrepancy)?.to_vector())
}

/// `Σ Φᵀ Σ⁻¹ Φ` over the residual list.
pub fn weighted_loss(residuals: &[Vector6<f64>], w: &LossWeights) -> f64 {
    residuals
        .iter()
        .map(|phi| (phi.transpose() * w.sigma_inv * phi)[(0, 0)])
        .sum()
}

/// Estimates Σ from training labels as the mean-removed second moment of
/// their twists, regularized by `+1e-8·I`, and returns its inverse.
///
/// Errors if fewer than 7 labels are given (a 6×6 covariance needs them) or
/// if the regularized matrix still has condition number above 1e12.
pub fn empirical_covariance(labels: &[OdometryLabel]) -> Result<LossWeights> {
    const EPSILON: f64 = 1e-8;
    const MAX_CONDITION: f64 = 1e12;

    if labels.len() < 7 {
        return Err(Error::invalid(format!(
            "empirical_covariance: need at least 7 labels, got {}",
            labels.len()
        )));
    }
    let twists: Vec<Vector6<f64>> = labels
        .iter()
        .map(|l| se3_log(&l.delta).map(|xi| xi.to_vector()))
        .collect::<Result<_>>()?;
    let n = twists.len() as f64;
    let mean: Vector6<f64> = twists.iter().sum::<Vector6<f64>>() / n;
    let mut sigma = Matrix6::<f64>::zeros();
    for xi in &twists {
        let centered = xi - mean;
        sigma += centered * centered.transpose();
    }
    sigma /= n;
    sigma += Matrix6::identity() * EPSILON;

    let eig = sigma.symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::invalid(format!(
            "empirical covariance is ill-conditioned (cond ≈ {:.3e}); increase the regularization",
            max / min
        )));
    }
    let inv = sigma
        .cholesky()
        .ok_or_else(|| Error::invalid("empirical covariance is not positive definite"))?
        .inverse();
    // the factored inverse is symmetric only up to rounding
    LossWeights::new((inv + inv.transpose()) * 0.5)
}
