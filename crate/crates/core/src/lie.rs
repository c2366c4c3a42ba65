//! SO(3)/SE(3) primitives and the integral correctives Γ and Λ.
//!
//! Rotations are stored as 3×3 matrices. Every map with a removable
//! singularity at the origin (`so3_exp`, `so3_log`, [`gamma`], [`lambda`])
//! switches to a 4th-order Taylor expansion below `SMALL_ANGLE`, and the two
//! coefficient ratios that cancel catastrophically keep their series up to
//! `CANCELLATION_ANGLE`, so both branches agree to better than 1e-12 at
//! every switch.
//!
//! Γ and Λ are the first- and second-order integrals of the rotation
//! exponential over one unit interval,
//!
//! ```text
//! Γ(θ) = ∫₀¹ exp(s θ^) ds            = I + (1-cos‖θ‖)/‖θ‖² θ^ + (‖θ‖-sin‖θ‖)/‖θ‖³ (θ^)²
//! Λ(θ) = ∫₀¹ ∫₀ˢ exp(u θ^) du ds     = ½I + (‖θ‖-sin‖θ‖)/‖θ‖³ θ^ + (cos‖θ‖-1+‖θ‖²/2)/‖θ‖⁴ (θ^)²
//! ```
//!
//! so Γ(0) = I and Λ(0) = ½I. Γ is also the left Jacobian of SO(3), which is
//! why it doubles as the translation action of the SE(3) exponential.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Angle below which the Taylor branches take over (rad).
pub const SMALL_ANGLE: f64 = 1e-4;

/// The ratios `(x-sin x)/x³` and `(x²/2-(1-cos x))/x⁴` cancel so badly that
/// their series stay more accurate than the direct form up to here.
const CANCELLATION_ANGLE: f64 = 1e-2;

/// Frobenius tolerance for orthonormality / skew-symmetry validation.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rotation products are re-orthonormalized after this many compositions.
const RENORMALIZE_EVERY: u32 = 256;

/// Builds the skew-symmetric matrix `[v]×` such that `[v]× w = v × w`.
fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// sin(x)/x
#[inline]
fn sinc(x: f64) -> f64 {
    if x < SMALL_ANGLE {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// (1 - cos x)/x², with `1 - cos x` as `2 sin²(x/2)` to dodge cancellation.
#[inline]
fn one_minus_cos_over_x2(x: f64) -> f64 {
    if x < SMALL_ANGLE {
        let x2 = x * x;
        0.5 - x2 / 24.0 + x2 * x2 / 720.0
    } else {
        let s = (0.5 * x).sin();
        2.0 * s * s / (x * x)
    }
}

/// (x - sin x)/x³
#[inline]
fn x_minus_sin_over_x3(x: f64) -> f64 {
    if x < CANCELLATION_ANGLE {
        let x2 = x * x;
        1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0
    } else {
        (x - x.sin()) / (x * x * x)
    }
}

/// (x²/2 - (1 - cos x))/x⁴
#[inline]
fn half_x2_minus_one_minus_cos_over_x4(x: f64) -> f64 {
    if x < CANCELLATION_ANGLE {
        let x2 = x * x;
        1.0 / 24.0 - x2 / 720.0 + x2 * x2 / 40320.0
    } else {
        let s = (0.5 * x).sin();
        (0.5 * x * x - 2.0 * s * s) / (x * x * x * x)
    }
}

/// Converts a 3-vector into its skew-symmetric matrix representation.
///
/// Errors if any component is not finite.
pub fn hat(v: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
        return Err(Error::invalid(format!("hat: non-finite input {v:?}")));
    }
    Ok(skew(v))
}

/// Extracts the 3-vector from a skew-symmetric matrix; inverse of [`hat`].
///
/// Errors if `‖M + Mᵀ‖_F` exceeds [`ORTHONORMAL_TOL`].
pub fn vee(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let sym = m + m.transpose();
    if sym.norm() >= ORTHONORMAL_TOL {
        return Err(Error::invalid(format!(
            "vee: input is not skew-symmetric (‖M+Mᵀ‖ = {:.3e})",
            sym.norm()
        )));
    }
    Ok(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// A rotation matrix in SO(3).
///
/// Kept orthonormal by construction; long composition chains are projected
/// back onto SO(3) (nearest orthogonal matrix) every 256 multiplications.
#[derive(Clone, Copy, Debug)]
pub struct Rotation {
    m: Matrix3<f64>,
    chain: u32,
}

impl PartialEq for Rotation {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            m: Matrix3::identity(),
            chain: 0,
        }
    }

    /// Wraps a matrix, validating `RᵀR = I` and `det R = 1` within 1e-9.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let defect = (m.transpose() * m - Matrix3::identity()).norm();
        if !defect.is_finite() || defect >= ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "rotation matrix is not orthonormal (‖RᵀR-I‖ = {defect:.3e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() >= ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "rotation matrix has det = {det}, expected 1"
            )));
        }
        Ok(Rotation { m, chain: 0 })
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// The inverse rotation (transpose).
    pub fn inverse(&self) -> Self {
        Rotation {
            m: self.m.transpose(),
            chain: self.chain,
        }
    }

    /// Rotates a vector.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.m * v
    }

    /// Nearest orthogonal matrix (polar factor via SVD, det forced to +1).
    fn project(m: &Matrix3<f64>) -> Matrix3<f64> {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd of 3x3 requested with u");
        let v_t = svd.v_t.expect("svd of 3x3 requested with v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // flip the singular direction with the smallest singular value
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        r
    }
}

impl std::ops::Mul for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        let mut out = Rotation {
            m: self.m * rhs.m,
            chain: self.chain.max(rhs.chain) + 1,
        };
        if out.chain >= RENORMALIZE_EVERY {
            out.m = Rotation::project(&out.m);
            out.chain = 0;
        }
        out
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        &self * &rhs
    }
}

/// SO(3) exponential map (Rodrigues formula).
pub fn so3_exp(theta: &Vector3<f64>) -> Rotation {
    let angle = theta.norm();
    let k = skew(theta);
    let (a, b) = (sinc(angle), one_minus_cos_over_x2(angle));
    Rotation {
        m: Matrix3::identity() + a * k + b * (k * k),
        chain: 0,
    }
}

/// SO(3) logarithm; returns the rotation vector with `‖θ‖ ≤ π`.
///
/// The angle comes from `atan2(‖(R-Rᵀ)/2‖, (tr R - 1)/2)`, which stays well
/// conditioned at both ends of the range; near π the axis is recovered from
/// the largest diagonal element of the symmetric part.
pub fn so3_log(r: &Rotation) -> Result<Vector3<f64>> {
    let m = &r.m;
    let cos = (m.trace() - 1.0) * 0.5;
    if cos.abs() > 1.0 + 1e-7 {
        return Err(Error::invalid(format!(
            "so3_log: trace-based cosine {cos} outside [-1, 1]"
        )));
    }
    // w = sin(angle) * axis
    let w = Vector3::new(
        (m[(2, 1)] - m[(1, 2)]) * 0.5,
        (m[(0, 2)] - m[(2, 0)]) * 0.5,
        (m[(1, 0)] - m[(0, 1)]) * 0.5,
    );
    let sin = w.norm();
    let angle = sin.atan2(cos.clamp(-1.0, 1.0));

    if angle < SMALL_ANGLE {
        // θ = angle/sin(angle) · w, expanded for small angles
        let a2 = angle * angle;
        return Ok(w * (1.0 + a2 / 6.0 + 7.0 * a2 * a2 / 360.0));
    }
    if std::f64::consts::PI - angle > SMALL_ANGLE {
        return Ok(w * (angle / sin));
    }

    // Near π: sin ≈ 0, so the axis comes out of aaᵀ = (R_sym - cos·I)/(1-cos)
    // through its largest diagonal element.
    let one_minus = 1.0 - cos;
    let sym = (m + m.transpose()) * 0.5;
    let diag = [
        (sym[(0, 0)] - cos) / one_minus,
        (sym[(1, 1)] - cos) / one_minus,
        (sym[(2, 2)] - cos) / one_minus,
    ];
    let i = (0..3).max_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap();
    let mut axis = Vector3::zeros();
    axis[i] = diag[i].max(0.0).sqrt();
    for j in 0..3 {
        if j != i {
            axis[j] = sym[(i, j)] / (one_minus * axis[i]);
        }
    }
    axis.normalize_mut();
    // Orient along w while it is informative; at exactly π either sign is
    // canonical and the sqrt already fixed one deterministically.
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * angle)
}

/// First-order corrective Γ(θ) = ∫₀¹ exp(s θ^) ds. Γ(0) = I.
pub fn gamma(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let k = skew(theta);
    Matrix3::identity() + one_minus_cos_over_x2(angle) * k + x_minus_sin_over_x3(angle) * (k * k)
}

/// Second-order corrective Λ(θ) = ∫₀¹∫₀ˢ exp(u θ^) du ds. Λ(0) = ½I.
pub fn lambda(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let k = skew(theta);
    Matrix3::identity() * 0.5
        + x_minus_sin_over_x3(angle) * k
        + half_x2_minus_one_minus_cos_over_x4(angle) * (k * k)
}

/// Inverse of Γ (the inverse left Jacobian); valid for `‖θ‖ ≤ π`.
fn gamma_inv(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let k = skew(theta);
    let b = if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        1.0 / 12.0 + a2 / 720.0 + a2 * a2 / 30240.0
    } else {
        let half = 0.5 * angle;
        (1.0 - half * half.cos() / half.sin()) / (angle * angle)
    };
    Matrix3::identity() - 0.5 * k + b * (k * k)
}

/// An se(3) tangent vector: translation part `rho`, rotation part `theta`.
///
/// Logarithms always come back in the canonical range `‖theta‖ ≤ π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    pub rho: Vector3<f64>,
    pub theta: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Twist {
            rho: Vector3::zeros(),
            theta: Vector3::zeros(),
        }
    }

    pub fn new(rho: Vector3<f64>, theta: Vector3<f64>) -> Self {
        Twist { rho, theta }
    }

    /// Stacks the twist as `[rho, theta]`.
    pub fn to_vector(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(
            self.rho.x,
            self.rho.y,
            self.rho.z,
            self.theta.x,
            self.theta.y,
            self.theta.z,
        )
    }

    pub fn from_vector(v: &nalgebra::Vector6<f64>) -> Self {
        Twist {
            rho: Vector3::new(v[0], v[1], v[2]),
            theta: Vector3::new(v[3], v[4], v[5]),
        }
    }
}

/// A rigid transform in SE(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Transform {
            rotation,
            translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Transform {
            translation: -inv.apply(&self.translation),
            rotation: inv,
        }
    }

    /// Applies the transform to a point.
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(p) + self.translation
    }
}

impl std::ops::Mul for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        Transform {
            rotation: &self.rotation * &rhs.rotation,
            translation: self.rotation.apply(&rhs.translation) + self.translation,
        }
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        &self * &rhs
    }
}

/// SE(3) exponential map: `R = exp(θ^)`, `t = Γ(θ)·ρ`.
pub fn se3_exp(xi: &Twist) -> Transform {
    Transform {
        rotation: so3_exp(&xi.theta),
        translation: gamma(&xi.theta) * xi.rho,
    }
}

/// SE(3) logarithm; inverse of [`se3_exp`] on the canonical range.
pub fn se3_log(t: &Transform) -> Result<Twist> {
    let theta = so3_log(&t.rotation)?;
    Ok(Twist {
        rho: gamma_inv(&theta) * t.translation,
        theta,
    })
}
