//! Independent brute-force integrators.
//!
//! Everything here exists to check the closed-form code paths from the
//! outside: tests and the `compare` command treat these functions as ground
//! truth. The implementations deliberately share nothing with
//! [`crate::preint`] beyond the `hat`/`exp` primitives, and `exp` itself is
//! cross-checked against [`exp_taylor`] below. Body-frame signals are held
//! constant over each sample interval (zero-order hold), mirroring the model
//! the closed forms assume — the oracle certifies correctness under that
//! model, not against physical reality.

use nalgebra::{Matrix3, Vector3};

use crate::imu::{Gravity, ImuSample, PoseState};
use crate::lie::so3_exp;

/// Kahan-compensated vector accumulator. Millions of micro-steps would
/// otherwise bury the oracle's truncation error under summation noise.
struct CompensatedSum {
    sum: Vector3<f64>,
    compensation: Vector3<f64>,
}

impl CompensatedSum {
    fn new(start: Vector3<f64>) -> Self {
        CompensatedSum {
            sum: start,
            compensation: Vector3::zeros(),
        }
    }

    fn add(&mut self, increment: Vector3<f64>) {
        let adjusted = increment - self.compensation;
        let next = self.sum + adjusted;
        self.compensation = (next - self.sum) - adjusted;
        self.sum = next;
    }
}

/// Integrates a sample batch by splitting every interval into `substeps`
/// first-order micro-steps of the discrete propagation equations.
///
/// With `substeps = 1` this is exactly the Euler propagation chain; as
/// `substeps → ∞` it converges (first order) to the switched-linear solution.
pub fn integrate_fine(
    state: &PoseState,
    samples: &[ImuSample],
    dt: f64,
    substeps: usize,
    g: &Gravity,
) -> PoseState {
    assert!(substeps >= 1, "integrate_fine: substeps must be >= 1");
    let h = dt / substeps as f64;
    let mut rotation = *state.rotation.matrix();
    let mut velocity = CompensatedSum::new(state.velocity);
    let mut position = CompensatedSum::new(state.position);

    for s in samples {
        let step = so3_exp(&(s.gyro * h));
        for _ in 0..substeps {
            let accel_world = rotation * s.accel;
            position.add(velocity.sum * h + g.0 * (0.5 * h * h) + accel_world * (0.5 * h * h));
            velocity.add(g.0 * h + accel_world * h);
            rotation *= step.matrix();
        }
    }

    PoseState {
        t: state.t + samples.len() as f64 * dt,
        rotation: crate::lie::Rotation::from_matrix(renormalize(&rotation))
            .expect("oracle rotation drifted off SO(3)"),
        velocity: velocity.sum,
        position: position.sum,
    }
}

/// Richardson extrapolation of [`integrate_fine`]: `2·fine(2n) − fine(n)`.
///
/// Cancels the leading first-order error term, leaving O(n⁻²) — needed when a
/// reference below ~1e-9 relative error is required without an astronomical
/// substep count.
pub fn integrate_fine_extrapolated(
    state: &PoseState,
    samples: &[ImuSample],
    dt: f64,
    substeps: usize,
    g: &Gravity,
) -> PoseState {
    let coarse = integrate_fine(state, samples, dt, substeps, g);
    let fine = integrate_fine(state, samples, dt, 2 * substeps, g);
    PoseState {
        t: fine.t,
        // rotation is exact for constant ω either way; keep the finer one
        rotation: fine.rotation,
        velocity: fine.velocity * 2.0 - coarse.velocity,
        position: fine.position * 2.0 - coarse.position,
    }
}

/// Midpoint-rule evaluation of Γ(θ) = ∫₀¹ exp(s θ^) ds with `n` points.
/// Error is O(n⁻²).
pub fn quadrature_gamma(theta: &Vector3<f64>, n: usize) -> Matrix3<f64> {
    assert!(n >= 100, "quadrature_gamma: need at least 100 points");
    let mut acc = Matrix3::zeros();
    for i in 0..n {
        let s = (i as f64 + 0.5) / n as f64;
        acc += *so3_exp(&(theta * s)).matrix();
    }
    acc / n as f64
}

/// Midpoint-rule evaluation of Λ(θ) = ∫₀¹∫₀ˢ exp(u θ^) du ds with `n` points.
///
/// The inner integral is removed exactly by swapping the integration order,
/// ∫₀¹∫₀ˢ f(u) du ds = ∫₀¹ (1-u) f(u) du, so the midpoint rule keeps its
/// O(n⁻²) error on the double integral.
pub fn quadrature_lambda(theta: &Vector3<f64>, n: usize) -> Matrix3<f64> {
    assert!(n >= 100, "quadrature_lambda: need at least 100 points");
    let mut acc = Matrix3::zeros();
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        acc += (1.0 - u) * *so3_exp(&(theta * u)).matrix();
    }
    acc / n as f64
}

/// Genuinely nested midpoint quadrature of Λ (outer over s, inner over
/// [0, s]). O(n·m) exponentials — used only to validate the order swap in
/// [`quadrature_lambda`].
pub fn quadrature_lambda_nested(theta: &Vector3<f64>, outer: usize, inner: usize) -> Matrix3<f64> {
    assert!(outer >= 100 && inner >= 100);
    let mut acc = Matrix3::zeros();
    for i in 0..outer {
        let s = (i as f64 + 0.5) / outer as f64;
        let mut inner_acc = Matrix3::zeros();
        for j in 0..inner {
            let u = s * (j as f64 + 0.5) / inner as f64;
            inner_acc += *so3_exp(&(theta * u)).matrix();
        }
        acc += inner_acc * (s / inner as f64);
    }
    acc / outer as f64
}

/// Plain truncated power series Σ (θ^)ⁿ/n!, summed until the terms vanish.
/// Cross-checks the Rodrigues-form `so3_exp` the other oracles lean on.
pub fn exp_taylor(theta: &Vector3<f64>) -> Matrix3<f64> {
    let k = Matrix3::new(
        0.0, -theta.z, theta.y, //
        theta.z, 0.0, -theta.x, //
        -theta.y, theta.x, 0.0,
    );
    let mut acc = Matrix3::identity();
    let mut term = Matrix3::identity();
    for n in 1..60 {
        term = term * k / n as f64;
        acc += term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    acc
}

fn renormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::propagate_euler;
    use crate::lie::{gamma, lambda, Rotation};
    use approx::assert_relative_eq;

    #[test]
    fn exp_matches_taylor_series() {
        for theta in [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1e-6, -2e-6, 3e-7),
            Vector3::new(0.3, -0.2, 0.1),
            Vector3::new(1.5, 2.0, -1.0),
        ] {
            let diff = (so3_exp(&theta).matrix() - exp_taylor(&theta)).norm();
            assert!(
                diff < 1e-13,
                "exp vs series differ by {diff:.3e} at {theta:?}"
            );
        }
    }

    #[test]
    fn quadrature_at_zero_is_exact() {
        assert_eq!(
            quadrature_gamma(&Vector3::zeros(), 100),
            Matrix3::identity()
        );
        assert_eq!(
            quadrature_lambda(&Vector3::zeros(), 100),
            Matrix3::identity() * 0.5
        );
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let theta = Vector3::new(0.0, 0.0, 0.5);
        assert!((quadrature_gamma(&theta, 10_000) - gamma(&theta)).norm() < 1e-8);
        let theta = Vector3::new(0.3, -0.2, 0.1);
        assert!((quadrature_lambda(&theta, 10_000) - lambda(&theta)).norm() < 1e-8);
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        let theta = Vector3::new(1.2, -0.8, 1.6);
        let err_g = |n| (quadrature_gamma(&theta, n) - gamma(&theta)).norm();
        let err_l = |n| (quadrature_lambda(&theta, n) - lambda(&theta)).norm();
        let ratio_g = err_g(200) / err_g(400);
        let ratio_l = err_l(200) / err_l(400);
        assert!((3.5..=4.5).contains(&ratio_g), "Γ ratio {ratio_g}");
        assert!((3.5..=4.5).contains(&ratio_l), "Λ ratio {ratio_l}");
    }

    #[test]
    fn order_swap_agrees_with_nested_quadrature() {
        let theta = Vector3::new(0.7, 0.4, -1.1);
        let swapped = quadrature_lambda(&theta, 1000);
        let nested = quadrature_lambda_nested(&theta, 1000, 400);
        assert!((swapped - nested).norm() < 1e-5);
    }

    #[test]
    fn quadrature_commutes_with_theta_hat() {
        let theta = Vector3::new(0.4, -0.9, 0.2);
        let k = crate::lie::hat(&theta).unwrap();
        let q = quadrature_gamma(&theta, 500);
        assert!((k * q - q * k).norm() < 1e-12);
    }

    #[test]
    fn substeps_one_is_the_euler_chain() {
        let state = PoseState::new(
            0.0,
            crate::lie::so3_exp(&Vector3::new(0.1, -0.2, 0.3)),
            Vector3::new(0.5, 0.0, -0.5),
            Vector3::new(1.0, 1.0, 1.0),
        );
        let samples: Vec<_> = (0..10)
            .map(|k| {
                ImuSample::new(
                    k as f64 * 0.01,
                    Vector3::new(0.2, 0.1 * k as f64, -0.3),
                    Vector3::new(1.0, -0.5, 0.25 * k as f64),
                )
            })
            .collect();
        let g = Gravity::standard();
        let fine = integrate_fine(&state, &samples, 0.01, 1, &g);
        let mut chained = state;
        for s in &samples {
            chained = propagate_euler(&chained, s, 0.01, &g);
        }
        assert_relative_eq!(fine.position, chained.position, epsilon = 1e-14);
        assert_relative_eq!(fine.velocity, chained.velocity, epsilon = 1e-14);
        assert_relative_eq!(
            *fine.rotation.matrix(),
            *chained.rotation.matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_input_is_identity_motion() {
        let state = PoseState::origin(0.0);
        let samples: Vec<_> = (0..5)
            .map(|k| ImuSample::new(k as f64 * 0.1, Vector3::zeros(), Vector3::zeros()))
            .collect();
        let out = integrate_fine(&state, &samples, 0.1, 100, &Gravity::zero());
        assert_eq!(out.position, Vector3::zeros());
        assert_eq!(out.velocity, Vector3::zeros());
        assert_eq!(out.rotation, Rotation::identity());
    }

    #[test]
    fn dense_substepping_approaches_the_exact_step() {
        // ‖ω‖Δt = 1e-3: first-order error ≈ ‖ω‖Δt/(2·substeps) sits below the
        // 1e-7 relative budget at 10⁴ substeps.
        let state = PoseState::origin(0.0);
        let samples = [ImuSample::new(
            0.0,
            Vector3::new(0.06, 0.08, 0.0),
            Vector3::new(2.0, -1.0, 0.5),
        )];
        let dt = 0.01;
        let g = Gravity::zero();
        let fine = integrate_fine(&state, &samples, dt, 10_000, &g);
        let exact = crate::imu::propagate_exact(&state, &samples[0], dt, &g);
        let rel_v = (fine.velocity - exact.velocity).norm() / exact.velocity.norm();
        let rel_p = (fine.position - exact.position).norm() / exact.position.norm();
        assert!(rel_v < 1e-7, "velocity relative error {rel_v:.3e}");
        assert!(rel_p < 1e-7, "position relative error {rel_p:.3e}");
    }

    #[test]
    fn refinement_halves_the_error() {
        let state = PoseState::origin(0.0);
        let samples = [ImuSample::new(
            0.0,
            Vector3::new(0.8, -1.1, 0.5),
            Vector3::new(1.5, 2.0, -0.5),
        )];
        let dt = 0.1;
        let g = Gravity::zero();
        let exact = crate::imu::propagate_exact(&state, &samples[0], dt, &g);
        let err = |n: usize| {
            let fine = integrate_fine(&state, &samples, dt, n, &g);
            (fine.position - exact.position).norm() + (fine.velocity - exact.velocity).norm()
        };
        let ratio = err(64) / err(128);
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn extrapolation_is_second_order() {
        let state = PoseState::origin(0.0);
        let samples = [ImuSample::new(
            0.0,
            Vector3::new(0.8, -1.1, 0.5),
            Vector3::new(1.5, 2.0, -0.5),
        )];
        let dt = 0.1;
        let g = Gravity::zero();
        let exact = crate::imu::propagate_exact(&state, &samples[0], dt, &g);
        let fine = integrate_fine_extrapolated(&state, &samples, dt, 10_000, &g);
        let rel = (fine.position - exact.position).norm() / exact.position.norm();
        assert!(rel < 1e-9, "extrapolated relative error {rel:.3e}");
    }
}
