//! Sensor model: measurement synthesis, noise injection, and discrete
//! full-state propagation.
//!
//! Two propagators are provided. [`propagate_euler`] holds the *world-frame*
//! acceleration constant over a sample interval; [`propagate_exact`] holds
//! the *body-frame* signals constant and integrates the resulting switched
//! linear system in closed form through Γ and Λ. They coincide when the
//! gyro reads zero, and the Euler step converges to the exact one at first
//! order as the interval shrinks.
//!
//! Biases and noise exist only in [`corrupt`]; the propagators and the
//! preintegration built on top of them consume raw measurements as-is.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lie::{gamma, lambda, so3_exp, Rotation};

/// Standard gravity magnitude (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// One raw IMU reading: body-frame angular velocity and specific force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    /// Timestamp (s); strictly increasing within a stream.
    pub t: f64,
    /// Angular velocity, body frame (rad/s).
    pub gyro: Vector3<f64>,
    /// Specific force, body frame (m/s²).
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vector3<f64>, accel: Vector3<f64>) -> Self {
        ImuSample { t, gyro, accel }
    }
}

/// Gravity vector in the world frame (m/s²). Fixed per run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gravity(pub Vector3<f64>);

impl Gravity {
    /// `[0, 0, -9.80665]`
    pub fn standard() -> Self {
        Gravity(Vector3::new(0.0, 0.0, -STANDARD_GRAVITY))
    }

    pub fn zero() -> Self {
        Gravity(Vector3::zeros())
    }
}

impl Default for Gravity {
    fn default() -> Self {
        Gravity::standard()
    }
}

/// Full navigation state in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseState {
    pub t: f64,
    /// Orientation, world ← body.
    pub rotation: Rotation,
    /// Velocity, world frame (m/s).
    pub velocity: Vector3<f64>,
    /// Position, world frame (m).
    pub position: Vector3<f64>,
}

impl PoseState {
    pub fn new(t: f64, rotation: Rotation, velocity: Vector3<f64>, position: Vector3<f64>) -> Self {
        PoseState {
            t,
            rotation,
            velocity,
            position,
        }
    }

    /// State at rest at the origin.
    pub fn origin(t: f64) -> Self {
        PoseState::new(t, Rotation::identity(), Vector3::zeros(), Vector3::zeros())
    }

    /// The pose as a rigid transform (drops velocity).
    pub fn transform(&self) -> crate::lie::Transform {
        crate::lie::Transform::new(self.rotation, self.position)
    }
}

/// Time-ordered sequence of poses with interpolation support (see
/// `dataset::interpolate_pose`).
#[derive(Clone, Debug)]
pub struct Trajectory {
    poses: Vec<PoseState>,
}

impl Trajectory {
    /// Wraps a pose list, validating strictly increasing timestamps.
    pub fn new(poses: Vec<PoseState>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::invalid("trajectory must contain at least one pose"));
        }
        for pair in poses.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::invalid(format!(
                    "trajectory timestamps not strictly increasing at t = {}",
                    pair[1].t
                )));
            }
        }
        Ok(Trajectory { poses })
    }

    pub fn poses(&self) -> &[PoseState] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.poses[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.poses[self.poses.len() - 1].t
    }
}

/// Noise/bias model for [`corrupt`]. All standard deviations are per-sample;
/// the random-walk strengths are per √s.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub gyro_noise_std: f64,
    pub accel_noise_std: f64,
    pub gyro_bias_walk_std: f64,
    pub accel_bias_walk_std: f64,
    pub initial_gyro_bias: Vector3<f64>,
    pub initial_accel_bias: Vector3<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    /// All-zero noise: [`corrupt`] becomes the identity.
    pub fn none(seed: u64) -> Self {
        NoiseSpec {
            gyro_noise_std: 0.0,
            accel_noise_std: 0.0,
            gyro_bias_walk_std: 0.0,
            accel_bias_walk_std: 0.0,
            initial_gyro_bias: Vector3::zeros(),
            initial_accel_bias: Vector3::zeros(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let stds = [
            self.gyro_noise_std,
            self.accel_noise_std,
            self.gyro_bias_walk_std,
            self.accel_bias_walk_std,
        ];
        if stds.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid(
                "noise standard deviations must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// A stretch of motion with constant body-frame angular velocity and constant
/// body-frame (true) acceleration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionSegment {
    pub duration: f64,
    /// Body-frame angular velocity (rad/s).
    pub gyro: Vector3<f64>,
    /// Body-frame true acceleration (m/s²) — gravity is added back into the
    /// *measurements* only.
    pub accel: Vector3<f64>,
}

/// Propagates one sample interval under the constant-*world*-acceleration
/// assumption:
///
/// ```text
/// R ← R·exp((ω Δt)^)    v ← v + g Δt + R ã Δt    p ← p + v Δt + ½ g Δt² + ½ R ã Δt²
/// ```
pub fn propagate_euler(state: &PoseState, sample: &ImuSample, dt: f64, g: &Gravity) -> PoseState {
    debug_assert!(dt > 0.0);
    let accel_world = state.rotation.apply(&sample.accel);
    PoseState {
        t: state.t + dt,
        rotation: &state.rotation * &so3_exp(&(sample.gyro * dt)),
        velocity: state.velocity + g.0 * dt + accel_world * dt,
        position: state.position
            + state.velocity * dt
            + g.0 * (0.5 * dt * dt)
            + accel_world * (0.5 * dt * dt),
    }
}

/// Propagates one sample interval under the constant-*body*-signal assumption
/// (exact switched-linear step):
///
/// ```text
/// R ← R·exp(θ^)    v ← v + g Δt + R Γ(θ) ã Δt    p ← p + v Δt + ½ g Δt² + R Λ(θ) ã Δt²
/// ```
///
/// with `θ = ω Δt`. For `ω = 0` this reduces bit-for-bit to
/// [`propagate_euler`] because Γ(0) = I and Λ(0) = ½I exactly.
pub fn propagate_exact(state: &PoseState, sample: &ImuSample, dt: f64, g: &Gravity) -> PoseState {
    debug_assert!(dt > 0.0);
    let theta = sample.gyro * dt;
    let vel_dir = state.rotation.apply(&(gamma(&theta) * sample.accel));
    let pos_dir = state.rotation.apply(&(lambda(&theta) * sample.accel));
    PoseState {
        t: state.t + dt,
        rotation: &state.rotation * &so3_exp(&theta),
        velocity: state.velocity + g.0 * dt + vel_dir * dt,
        position: state.position
            + state.velocity * dt
            + g.0 * (0.5 * dt * dt)
            + pos_dir * (dt * dt),
    }
}

/// Simulates a trajectory from piecewise-constant body-frame commands and
/// returns it together with the ideal (noise-free) measurement stream.
///
/// Each sample's specific force is read off at the interval start
/// (`ã = a − Rᵀ g`) and the state is advanced by [`propagate_exact`] on that
/// reading, so trajectory and stream are exactly consistent under the
/// zero-order-hold measurement model. The trajectory carries one pose per
/// sample boundary (`n_samples + 1` poses).
pub fn simulate_trajectory(
    segments: &[MotionSegment],
    initial: &PoseState,
    rate_hz: f64,
    g: &Gravity,
) -> Result<(Trajectory, Vec<ImuSample>)> {
    if segments.is_empty() {
        return Err(Error::invalid("simulate_trajectory: empty segment list"));
    }
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::invalid(format!(
            "simulate_trajectory: rate must be positive, got {rate_hz}"
        )));
    }
    for seg in segments {
        if !(seg.duration > 0.0) {
            return Err(Error::invalid(format!(
                "simulate_trajectory: segment duration must be positive, got {}",
                seg.duration
            )));
        }
        if !(seg.gyro.iter().all(|x| x.is_finite()) && seg.accel.iter().all(|x| x.is_finite())) {
            return Err(Error::invalid(
                "simulate_trajectory: non-finite segment signal",
            ));
        }
    }

    let dt = 1.0 / rate_hz;
    let mut state = *initial;
    let mut poses = vec![state];
    let mut samples = Vec::new();
    let mut index = 0usize;

    for seg in segments {
        let n = (seg.duration * rate_hz).round().max(1.0) as usize;
        for _ in 0..n {
            let t = initial.t + index as f64 * dt;
            let measured = ImuSample {
                t,
                gyro: seg.gyro,
                accel: seg.accel - state.rotation.inverse().apply(&g.0),
            };
            state = propagate_exact(&state, &measured, dt, g);
            state.t = initial.t + (index + 1) as f64 * dt;
            samples.push(measured);
            poses.push(state);
            index += 1;
        }
    }

    Ok((Trajectory::new(poses)?, samples))
}

/// Adds Gaussian noise and random-walk biases to a measurement stream.
///
/// Bias evolution between samples k and k+1 uses variance `walk_std²·Δt`.
/// The output is a pure function of the input and `spec.seed`; the same seed
/// reproduces the stream bit for bit.
pub fn corrupt(samples: &[ImuSample], spec: &NoiseSpec) -> Vec<ImuSample> {
    spec.validate().expect("corrupt: invalid noise spec");
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let gyro_noise = Normal::new(0.0, spec.gyro_noise_std).unwrap();
    let accel_noise = Normal::new(0.0, spec.accel_noise_std).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();

    let mut gyro_bias = spec.initial_gyro_bias;
    let mut accel_bias = spec.initial_accel_bias;
    let mut out = Vec::with_capacity(samples.len());

    for (k, s) in samples.iter().enumerate() {
        let eta_g = Vector3::from_fn(|_, _| gyro_noise.sample(&mut rng));
        let eta_a = Vector3::from_fn(|_, _| accel_noise.sample(&mut rng));
        out.push(ImuSample {
            t: s.t,
            gyro: s.gyro + gyro_bias + eta_g,
            accel: s.accel + accel_bias + eta_a,
        });
        if k + 1 < samples.len() {
            let dt = samples[k + 1].t - s.t;
            let walk = dt.max(0.0).sqrt();
            gyro_bias +=
                Vector3::from_fn(|_, _| unit.sample(&mut rng)) * (spec.gyro_bias_walk_std * walk);
            accel_bias +=
                Vector3::from_fn(|_, _| unit.sample(&mut rng)) * (spec.accel_bias_walk_std * walk);
        }
    }
    out
}
