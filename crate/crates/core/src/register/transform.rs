use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::Point;

/// Wraps an angle to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// SE(3) pose as translation plus roll/pitch/yaw.
///
/// The rotation is `Rz(yaw) * Ry(pitch) * Rx(roll)`, and a point maps as
/// `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub translation: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            translation: Vector3::zeros(),
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    pub fn new(tx: f64, ty: f64, tz: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        RigidTransform {
            translation: Vector3::new(tx, ty, tz),
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        }
    }

    /// `[t_x, t_y, t_z, roll, pitch, yaw]`.
    pub fn to_params(&self) -> Vector6<f64> {
        let t = &self.translation;
        Vector6::new(t.x, t.y, t.z, self.roll, self.pitch, self.yaw)
    }

    pub fn from_params(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        Matrix3::new(
            cy * cp,
            cy * sp * sr - sy * cr,
            cy * sp * cr + sy * sr,
            sy * cp,
            sy * sp * sr + cy * cr,
            sy * sp * cr - cy * sr,
            -sp,
            cp * sr,
            cp * cr,
        )
    }

    pub fn from_rotation_translation(r: &Matrix3<f64>, t: Vector3<f64>) -> Self {
        let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(*r).euler_angles();
        Self::new(t.x, t.y, t.z, roll, pitch, yaw)
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation() * p.coords + self.translation)
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let r = self.rotation();
        Self::from_rotation_translation(
            &(r * other.rotation()),
            r * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation().transpose();
        Self::from_rotation_translation(&rt, -(rt * self.translation))
    }

    /// `self^-1 * other`.
    pub fn between(&self, other: &RigidTransform) -> RigidTransform {
        self.inverse().compose(other)
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, t: Vector3<f64>) -> Self {
        let (roll, pitch, yaw) = q.euler_angles();
        Self::new(t.x, t.y, t.z, roll, pitch, yaw)
    }

    /// Magnitude of the rotation, radians in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        self.quaternion().angle()
    }

    pub fn is_finite(&self) -> bool {
        self.to_params().iter().all(|v| v.is_finite())
    }
}

/// Derivatives of `R(roll, pitch, yaw)` with respect to each angle.
pub(crate) fn rotation_derivatives(t: &RigidTransform) -> [Matrix3<f64>; 3] {
    let (sr, cr) = t.roll.sin_cos();
    let (sp, cp) = t.pitch.sin_cos();
    let (sy, cy) = t.yaw.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let drx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sr, -cr, 0.0, cr, -sr);
    let dry = Matrix3::new(-sp, 0.0, cp, 0.0, 0.0, 0.0, -cp, 0.0, -sp);
    let drz = Matrix3::new(-sy, -cy, 0.0, cy, -sy, 0.0, 0.0, 0.0, 0.0);
    [rz * ry * drx, rz * dry * rx, drz * ry * rx]
}
