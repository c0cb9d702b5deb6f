use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-π, π]`. Values already in range are returned unchanged.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Rigid transform: unit quaternion rotation followed by a translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// URDF convention: fixed-axis roll about X, then pitch about Y, then yaw about Z.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
            Vector3::new(xyz[0], xyz[1], xyz[2]),
        )
    }

    pub fn from_axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self::new(UnitQuaternion::from_axis_angle(axis, angle), Vector3::zeros())
    }

    /// Builds a transform from a `(w, x, y, z)` quaternion, normalizing it.
    pub fn from_wxyz(q: [f64; 4], translation: Vector3<f64>) -> Self {
        let q = Quaternion::new(q[0], q[1], q[2], q[3]);
        Self::new(UnitQuaternion::new_normalize(q), translation)
    }

    pub fn from_rotation_matrix(m: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*m);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.rotation.euler_angles();
        [r, p, y]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Composition `self ∘ other`; the result quaternion is renormalized.
    pub fn compose(&self, other: &Transform) -> Transform {
        let q = self.rotation.quaternion() * other.rotation.quaternion();
        Transform {
            rotation: UnitQuaternion::new_normalize(q),
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv = self.rotation.inverse();
        Transform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Local +Z axis in the parent frame.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    /// Distance between translations and angle between rotations.
    pub fn residual(&self, other: &Transform) -> (f64, f64) {
        (
            (self.translation - other.translation).norm(),
            self.rotation.angle_to(&other.rotation),
        )
    }

    /// Interpolates translation linearly and rotation spherically.
    pub fn interpolate(&self, other: &Transform, s: f64) -> Transform {
        let rotation = self
            .rotation
            .try_slerp(&other.rotation, s, 1e-12)
            .unwrap_or(self.rotation);
        Transform {
            rotation,
            translation: self.translation.lerp(&other.translation, s),
        }
    }

    /// Camera-style look-at pose: +Z toward `target`, +Y pointing "down"
    /// relative to `up`, +X completing a right-handed frame. Falls back to
    /// world +X as the up reference when the view is parallel to `up`.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Transform {
        let z = (target - eye).normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vector3::x());
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let m = Matrix3::from_columns(&[x, y, z]);
        Transform::from_rotation_matrix(&m, eye)
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;
    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

/// Serialized form used in config files: translation plus URDF-style rpy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl From<PoseSpec> for Transform {
    fn from(p: PoseSpec) -> Self {
        Transform::from_xyz_rpy(p.xyz, p.rpy)
    }
}
