//! End-effector poses on ℝ³ × S³.

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Position plus unit-quaternion orientation.
///
/// The stored quaternion always has a non-negative scalar part, so the two
/// quaternions representing the same rotation collapse onto one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl TaskPose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: hemisphere(orientation),
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    /// Scalar-first quaternion components `[w, x, y, z]`.
    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn from_wxyz(position: Vector3<f64>, wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(position, UnitQuaternion::from_quaternion(q))
    }
}

pub(crate) fn hemisphere(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.quaternion().w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Rotation vector (axis · angle, angle in [0, π]) of a unit quaternion,
/// taking the shorter of the two double-cover representatives.
pub fn quaternion_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = hemisphere(*q);
    let v = q.imag();
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    let angle = 2.0 * s.atan2(q.quaternion().w);
    v * (angle / s)
}

/// Riemannian logarithm on ℝ³ × S³ at `from`, pointing to `to`.
///
/// The first three entries are the position difference in meters, the last
/// three the rotation vector of `from.q⁻¹ · to.q` in radians (body frame of `from`).
pub fn pose_log(from: &TaskPose, to: &TaskPose) -> Vector6<f64> {
    let dp = to.position - from.position;
    let dr = quaternion_log(&(from.orientation.inverse() * to.orientation));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Same as [`pose_log`] but with the rotation part expressed in the base frame,
/// which is the frame of the geometric Jacobian's angular rows.
pub fn pose_error_world(from: &TaskPose, to: &TaskPose) -> Vector6<f64> {
    let dp = to.position - from.position;
    let dr = quaternion_log(&(to.orientation * from.orientation.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Geodesic distance between two rotations, `2·acos|⟨qa, qb⟩|`.
pub fn orientation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    // atan2 form of the same quantity, accurate near zero.
    let rel = (a.inverse() * b).into_inner();
    2.0 * rel.imag().norm().atan2(rel.w.abs())
}

/// Serialized pose, used by metadata documents.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PoseRecord {
    pub xyz: [f64; 3],
    pub quat: [f64; 4],
}

impl From<&TaskPose> for PoseRecord {
    fn from(p: &TaskPose) -> Self {
        Self {
            xyz: [p.position.x, p.position.y, p.position.z],
            quat: p.quat_wxyz(),
        }
    }
}

impl From<PoseRecord> for TaskPose {
    fn from(r: PoseRecord) -> Self {
        TaskPose::from_wxyz(Vector3::from(r.xyz), r.quat)
    }
}
