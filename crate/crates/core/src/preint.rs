//! Preintegrated (PI) motion features.
//!
//! A batch of IMU samples between two keyframes is compressed into the 9-DOF
//! constraint (ΔR, Δv, Δp) that is independent of the initial state:
//!
//! ```text
//! ΔR_ij = ∏ exp((ω̃_k Δt)^)
//! Δv_ij = Σ ΔR_ik · C(Θ_k) · ã_k Δt                Θ_k = ω̃_k Δt
//! Δp_ij = Σ [ΔR_ik·Δv_ik Δt + ΔR_ik · D(Θ_k) · ã_k Δt²]
//! ```
//!
//! where the Forster formulation takes `C = I, D = ½I` (constant world-frame
//! acceleration between samples) and the accurate formulation takes
//! `C = Γ(Θ), D = Λ(Θ)` (constant body-frame signals, integrated in closed
//! form). Both share the rotation product, so ΔR is bit-identical between
//! methods. Raw measurements are used as-is: bias and noise compensation is
//! left to downstream consumers.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imu::{Gravity, ImuSample, PoseState};
use crate::lie::{gamma, lambda, so3_exp, Rotation};

/// Allowed timestamp jitter for "uniform rate" input (s).
pub const TIME_JITTER_TOL: f64 = 1e-6;

/// Which preintegration formulation to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Constant world-frame acceleration between samples.
    Forster,
    /// Constant body-frame signals between samples (switched-linear closed form).
    Accurate,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Forster => write!(f, "forster"),
            Method::Accurate => write!(f, "accurate"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forster" => Ok(Method::Forster),
            "accurate" => Ok(Method::Accurate),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected `forster` or `accurate`)"
            ))),
        }
    }
}

/// The 9-DOF preintegrated constraint over a sample batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiFeature {
    /// Relative rotation, body_i ← body_j.
    pub delta_r: Rotation,
    /// Velocity constraint, frame of body_i (m/s).
    pub delta_v: Vector3<f64>,
    /// Position constraint, frame of body_i (m).
    pub delta_p: Vector3<f64>,
    /// Time span (s); equals `n_samples · Δt` for uniform input.
    pub dt: f64,
    /// Number of samples folded in.
    pub n_samples: usize,
    /// Timestamp of the first sample (s); fixes the span for composition.
    pub t_start: f64,
}

impl PiFeature {
    /// The neutral element for [`compose`], spanning zero time at `t_start`.
    pub fn identity(t_start: f64) -> Self {
        PiFeature {
            delta_r: Rotation::identity(),
            delta_v: Vector3::zeros(),
            delta_p: Vector3::zeros(),
            dt: 0.0,
            n_samples: 0,
            t_start,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.dt
    }
}

fn validate_batch(samples: &[ImuSample], dt: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("preintegrate: empty sample slice"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("preintegrate: bad dt = {dt}")));
    }
    for (k, pair) in samples.windows(2).enumerate() {
        let gap = pair[1].t - pair[0].t;
        if !((gap - dt).abs() <= TIME_JITTER_TOL) {
            return Err(Error::invalid(format!(
                "preintegrate: non-uniform sampling at index {} (gap {:.9} s vs dt {:.9} s)",
                k + 1,
                gap,
                dt
            )));
        }
    }
    Ok(())
}

fn accumulate(samples: &[ImuSample], dt: f64, method: Method) -> Result<PiFeature> {
    validate_batch(samples, dt)?;
    let mut delta_r = Rotation::identity();
    let mut delta_v: Vector3<f64> = Vector3::zeros();
    let mut delta_p: Vector3<f64> = Vector3::zeros();

    for s in samples {
        let theta = s.gyro * dt;
        // Δp and Δv consume the pre-update ΔR_ik / Δv_ik snapshots.
        let (vel_inc, pos_inc) = match method {
            Method::Forster => {
                let dir = delta_r.apply(&s.accel);
                (dir * dt, dir * (0.5 * dt * dt))
            }
            Method::Accurate => (
                delta_r.apply(&(gamma(&theta) * s.accel)) * dt,
                delta_r.apply(&(lambda(&theta) * s.accel)) * (dt * dt),
            ),
        };
        delta_p += delta_v * dt + pos_inc;
        delta_v += vel_inc;
        delta_r = &delta_r * &so3_exp(&theta);
    }

    Ok(PiFeature {
        delta_r,
        delta_v,
        delta_p,
        dt: samples.len() as f64 * dt,
        n_samples: samples.len(),
        t_start: samples[0].t,
    })
}

/// Forster-formulation PI feature over a uniformly sampled batch.
pub fn preintegrate_forster(samples: &[ImuSample], dt: f64) -> Result<PiFeature> {
    accumulate(samples, dt, Method::Forster)
}

/// Accurate (switched-linear) PI feature over a uniformly sampled batch.
///
/// With zero angular rate this is bit-identical to [`preintegrate_forster`]
/// because Γ(0) = I and Λ(0) = ½I hold exactly.
pub fn preintegrate_accurate(samples: &[ImuSample], dt: f64) -> Result<PiFeature> {
    accumulate(samples, dt, Method::Accurate)
}

/// Dispatches on [`Method`].
pub fn preintegrate(samples: &[ImuSample], dt: f64, method: Method) -> Result<PiFeature> {
    accumulate(samples, dt, method)
}

/// Applies a PI feature to a starting state (inverts the constraint
/// definitions):
///
/// ```text
/// R_j = R_i ΔR     v_j = v_i + g Δt_ij + R_i Δv
/// p_j = p_i + v_i Δt_ij + ½ g Δt_ij² + R_i Δp
/// ```
pub fn apply(state: &PoseState, f: &PiFeature, g: &Gravity) -> PoseState {
    PoseState {
        t: state.t + f.dt,
        rotation: &state.rotation * &f.delta_r,
        velocity: state.velocity + g.0 * f.dt + state.rotation.apply(&f.delta_v),
        position: state.position
            + state.velocity * f.dt
            + g.0 * (0.5 * f.dt * f.dt)
            + state.rotation.apply(&f.delta_p),
    }
}

/// Chains two PI features over adjacent spans (`f_ij` then `f_jk`).
///
/// Errors unless `f_jk` starts where `f_ij` ends (within [`TIME_JITTER_TOL`]).
pub fn compose(f_ij: &PiFeature, f_jk: &PiFeature) -> Result<PiFeature> {
    if !((f_jk.t_start - f_ij.t_end()).abs() <= TIME_JITTER_TOL) {
        return Err(Error::invalid(format!(
            "compose: non-contiguous spans (first ends at {:.9}, second starts at {:.9})",
            f_ij.t_end(),
            f_jk.t_start
        )));
    }
    Ok(PiFeature {
        delta_r: &f_ij.delta_r * &f_jk.delta_r,
        delta_v: f_ij.delta_v + f_ij.delta_r.apply(&f_jk.delta_v),
        delta_p: f_ij.delta_p + f_ij.delta_v * f_jk.dt + f_ij.delta_r.apply(&f_jk.delta_p),
        dt: f_ij.dt + f_jk.dt,
        n_samples: f_ij.n_samples + f_jk.n_samples,
        t_start: f_ij.t_start,
    })
}

/// A sliding window of contiguous PI features.
#[derive(Clone, Debug)]
pub struct FeatureWindow {
    pub features: Vec<PiFeature>,
    pub t_start: f64,
    pub t_end: f64,
}

impl FeatureWindow {
    /// Composes all features end to end into one constraint over the window.
    pub fn end_to_end(&self) -> Result<PiFeature> {
        let mut acc = PiFeature::identity(self.t_start);
        for f in &self.features {
            acc = compose(&acc, f)?;
        }
        Ok(acc)
    }
}

/// Slides a `window`-sample window over the stream in increments of `step`
/// samples and preintegrates each `step`-sample chunk once.
///
/// Every window holds `window / step` features; overlapping windows share
/// chunk features (computed once, keyed by chunk start index). A stream
/// shorter than one window yields an empty result.
pub fn window_features(
    samples: &[ImuSample],
    window: usize,
    step: usize,
    method: Method,
) -> Result<Vec<FeatureWindow>> {
    if window == 0 || step == 0 {
        return Err(Error::invalid(
            "window_features: window and step must be positive",
        ));
    }
    if window % step != 0 {
        return Err(Error::invalid(format!(
            "window_features: window ({window}) must be divisible by step ({step})"
        )));
    }
    if samples.len() < window {
        return Ok(Vec::new());
    }

    let dt = infer_dt(samples)?;
    let chunks_per_window = window / step;
    let n_chunks = samples.len() / step;
    let n_windows = (samples.len() - window) / step + 1;

    let chunk_features: Vec<PiFeature> = (0..n_chunks)
        .into_par_iter()
        .map(|c| preintegrate(&samples[c * step..(c + 1) * step], dt, method))
        .collect::<Result<_>>()?;

    let mut windows = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let features = chunk_features[w..w + chunks_per_window].to_vec();
        windows.push(FeatureWindow {
            t_start: features[0].t_start,
            t_end: features[chunks_per_window - 1].t_end(),
            features,
        });
    }
    Ok(windows)
}

/// Median inter-sample gap; the uniformity contract itself is enforced per
/// chunk by `preintegrate`.
fn infer_dt(samples: &[ImuSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("window_features: need at least two samples"));
    }
    let mut gaps: Vec<f64> = samples.windows(2).map(|p| p[1].t - p[0].t).collect();
    gaps.sort_by(f64::total_cmp);
    Ok(gaps[gaps.len() / 2])
}
