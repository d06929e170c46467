//! SE(3) camera poses and rotation parameterizations.

use nalgebra::{Matrix3, Point3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A camera pose in SE(3). The optical axis is the local +Z direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Point3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(translation: Point3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn identity() -> Self {
        Self {
            translation: Point3::origin(),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Direction the camera looks along, in world frame.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    pub fn is_finite(&self) -> bool {
        self.translation.coords.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }

    /// Transform a point from camera frame into world frame.
    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.translation + self.rotation * p.coords
    }

    /// Flatten to the 9-vector used as the action parameterization:
    /// translation followed by the first two rotation-matrix columns.
    pub fn to_vec9(&self) -> [f64; 9] {
        let m = self.rotation.to_rotation_matrix();
        let m = m.matrix();
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            m[(0, 0)],
            m[(1, 0)],
            m[(2, 0)],
            m[(0, 1)],
            m[(1, 1)],
            m[(2, 1)],
        ]
    }

    /// Rebuild a pose from the 9-vector form, re-orthonormalizing the
    /// rotation with Gram-Schmidt on the two encoded columns.
    pub fn from_vec9(v: &[f64; 9]) -> Self {
        let t = Point3::new(v[0], v[1], v[2]);
        let a = Vector3::new(v[3], v[4], v[5]);
        let b = Vector3::new(v[6], v[7], v[8]);
        let c0 = if a.norm() > 1e-12 {
            a.normalize()
        } else {
            Vector3::x()
        };
        let mut b_orth = b - c0 * c0.dot(&b);
        if b_orth.norm() < 1e-12 {
            b_orth = c0.cross(&Vector3::z());
            if b_orth.norm() < 1e-12 {
                b_orth = c0.cross(&Vector3::y());
            }
        }
        let c1 = b_orth.normalize();
        let c2 = c0.cross(&c1);
        let m = Matrix3::from_columns(&[c0, c1, c2]);
        let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            m,
        ));
        Self::new(t, rot)
    }
}

/// Pose whose optical axis points from `eye` toward `target`.
pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Pose> {
    let dir = target - eye;
    if dir.norm() < 1e-12 {
        return Err(Error::DegenerateDirection("eye equals target".into()));
    }
    let z = dir.normalize();
    let cross = up.cross(&z);
    if cross.norm() < 1e-9 {
        return Err(Error::DegenerateDirection(
            "up parallel to view direction".into(),
        ));
    }
    // Camera basis: +Z forward, +X right, +Y down (image v grows downward).
    let x = Unit::new_normalize(up.cross(&z)).into_inner();
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    let rot =
        UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m));
    Ok(Pose::new(eye, rot))
}

/// An ordered sequence of camera poses.
pub type PoseHorizon = Vec<Pose>;
