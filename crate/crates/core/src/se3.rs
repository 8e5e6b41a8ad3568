//! Rigid transforms on SE3 with exponential/logarithmic maps.
//!
//! Twists are ordered `(rotation, translation)` everywhere in the crate and
//! poses are updated by right (local) perturbation: `T <- T * exp(delta)`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

const SMALL_ANGLE: f64 = 1e-8;
const SERIES_ANGLE: f64 = 1e-2;

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(b)`.
#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[inline]
fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A tangent vector of SE3: rotational part first, then translational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist(pub Vector6<f64>);

impl Twist {
    pub fn zero() -> Self {
        Twist(Vector6::zeros())
    }

    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&rotation);
        v.fixed_rows_mut::<3>(3).copy_from(&translation);
        Twist(v)
    }

    pub fn from_slice(values: &[f64; 6]) -> Self {
        Twist(Vector6::from_row_slice(values))
    }

    pub fn rotation(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Rigid body transform stored as a rotation matrix and a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about the z axis by `yaw` radians followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        Pose {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation,
        }
    }

    /// `self * other`: applies `other` first, then `self`.
    #[inline]
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    #[inline]
    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self^-1 * other`, the pose of `other` expressed in the frame of `self`.
    #[inline]
    pub fn between(&self, other: &Pose) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt * other.rotation,
            translation: rt * (other.translation - self.translation),
        }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn exp(xi: &Twist) -> Pose {
        let omega = xi.rotation();
        let v = xi.translation();
        let theta2 = omega.norm_squared();
        let theta = theta2.sqrt();
        let w = hat(&omega);
        let w2 = w * w;
        let (a, b, c) = if theta < SMALL_ANGLE {
            (1.0, 0.5, 1.0 / 6.0)
        } else {
            let (s, co) = theta.sin_cos();
            (s / theta, (1.0 - co) / theta2, (theta - s) / (theta2 * theta))
        };
        let rotation = Matrix3::identity() + w * a + w2 * b;
        let jacobian = Matrix3::identity() + w * b + w2 * c;
        Pose {
            rotation,
            translation: jacobian * v,
        }
    }

    /// Logarithmic map. Rotations of exactly pi are resolved from the
    /// symmetric part of the rotation matrix.
    pub fn log(&self) -> Twist {
        let omega = so3_log(&self.rotation);
        let w = hat(&omega);
        let inv_jacobian = Matrix3::identity() - w * 0.5 + w * w * jacobian_inverse_coeff(omega.norm());
        Twist::new(omega, inv_jacobian * self.translation)
    }

    pub fn rotation_angle(&self) -> f64 {
        so3_log(&self.rotation).norm()
    }

    /// Projects the rotation back onto SO3 by polar decomposition.
    pub fn orthonormalized(&self) -> Pose {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * vt;
        }
        Pose {
            rotation: r,
            translation: self.translation,
        }
    }

    /// Adjoint with `(rotation, translation)` ordering: `exp(Ad * xi) = T exp(xi) T^-1`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let mut ad = Matrix6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rotation);
        ad.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(hat(&self.translation) * self.rotation));
        ad
    }

    /// Row-major `[R | t]`, the KITTI pose layout.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    pub fn from_row_major_3x4(v: &[f64; 12]) -> Pose {
        Pose {
            rotation: Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]),
            translation: Vector3::new(v[3], v[7], v[11]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;
    fn mul(self, rhs: &'a Pose) -> Pose {
        self.compose(rhs)
    }
}

pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let skew = vee(&(r - r.transpose())) * 0.5;
    let sin_theta = skew.norm();
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);
    if theta < SMALL_ANGLE {
        return skew;
    }
    if sin_theta > 1e-7 {
        return skew * (theta / sin_theta);
    }
    // Rotation angle at (or numerically at) pi: R = 2 a a^T - I.
    let sym = (r + Matrix3::identity()) * 0.5;
    let k = (0..3)
        .max_by(|&a, &b| sym[(a, a)].total_cmp(&sym[(b, b)]))
        .unwrap_or(0);
    let mut axis = sym.column(k).into_owned() / sym[(k, k)].max(0.0).sqrt();
    axis.normalize_mut();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Left Jacobian of SO3.
pub fn so3_left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let w = hat(omega);
    let (b, c) = if theta < SERIES_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let (s, co) = theta.sin_cos();
        ((1.0 - co) / theta2, (theta - s) / (theta2 * theta))
    };
    Matrix3::identity() + w * b + w * w * c
}

pub fn so3_left_jacobian_inverse(omega: &Vector3<f64>) -> Matrix3<f64> {
    let w = hat(omega);
    Matrix3::identity() - w * 0.5 + w * w * jacobian_inverse_coeff(omega.norm())
}

// (1 - (theta/2) cot(theta/2)) / theta^2, the w^2 coefficient of the inverse
// SO3 Jacobian. The half-angle form avoids cancellation in 1 - cos.
fn jacobian_inverse_coeff(theta: f64) -> f64 {
    let theta2 = theta * theta;
    if theta < SERIES_ANGLE {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / theta2
    }
}

// Coupling block of the SE3 left Jacobian.
fn se3_left_q(omega: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let (c1, c2, c3) = if theta < SERIES_ANGLE {
        (
            1.0 / 6.0 - theta2 / 120.0,
            1.0 / 24.0 - theta2 / 720.0,
            1.0 / 120.0 - theta2 / 2520.0,
        )
    } else {
        let (s, co) = theta.sin_cos();
        let t4 = theta2 * theta2;
        (
            (theta - s) / (theta2 * theta),
            (theta2 + 2.0 * co - 2.0) / (2.0 * t4),
            (2.0 * theta - 3.0 * s + theta * co) / (2.0 * t4 * theta),
        )
    };
    let w = hat(omega);
    let p = hat(v);
    let wp = w * p;
    let pw = p * w;
    let wpw = wp * w;
    p * 0.5 + (wp + pw + wpw) * c1 + (w * wp + pw * w - wpw * 3.0) * c2
        + (wpw * w + w * wpw) * c3
}

/// Left Jacobian of SE3 in `(rotation, translation)` ordering.
pub fn se3_left_jacobian(xi: &Twist) -> Matrix6<f64> {
    let omega = xi.rotation();
    let jr = so3_left_jacobian(&omega);
    let q = se3_left_q(&omega, &xi.translation());
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jr);
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&jr);
    j.fixed_view_mut::<3, 3>(3, 0).copy_from(&q);
    j
}

pub fn se3_left_jacobian_inverse(xi: &Twist) -> Matrix6<f64> {
    let omega = xi.rotation();
    let jinv = so3_left_jacobian_inverse(&omega);
    let q = se3_left_q(&omega, &xi.translation());
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jinv);
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&jinv);
    j.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-jinv * q * jinv));
    j
}

/// Inverse right Jacobian: `log(exp(xi) exp(d)) ~= xi + Jr^-1(xi) d`.
pub fn se3_right_jacobian_inverse(xi: &Twist) -> Matrix6<f64> {
    se3_left_jacobian_inverse(&Twist(-xi.0))
}
