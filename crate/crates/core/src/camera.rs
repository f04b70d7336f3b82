//! Pinhole camera with per-timestep camera-to-world poses.
//!
//! Camera frame convention: +x right, +y down, +z into the scene. Pixel
//! coordinates address pixel centers, so depth sample `D[v][u]` is the depth
//! along the ray through `(u, v)`.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Rigid camera-to-world transform: `world = rotation * cam + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
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
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    pub fn is_proper_rigid(&self) -> bool {
        self.orthonormality_error() <= 1e-6 && self.rotation.determinant() > 0.0
    }

    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn apply_inverse(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Serialized form of a [`Pose`], as it appears in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extrinsic {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&Extrinsic> for Pose {
    fn from(e: &Extrinsic) -> Self {
        let r = &e.rotation;
        Pose {
            rotation: Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            translation: Vector3::new(e.translation[0], e.translation[1], e.translation[2]),
        }
    }
}

impl From<&Pose> for Extrinsic {
    fn from(p: &Pose) -> Self {
        let m = &p.rotation;
        Extrinsic {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("non-positive depth {z} at timestep {t}")]
    NonPositiveDepth { z: f64, t: usize },
    #[error("point is behind the camera at timestep {t} (z = {z})")]
    BehindCamera { z: f64, t: usize },
    #[error("timestep {t} out of range (T = {num_timesteps})")]
    TimestepOutOfRange { t: usize, num_timesteps: usize },
}

/// Image-plane projection of a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-frame depth.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    /// One camera-to-world pose per timestep.
    pub poses: Vec<Pose>,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, poses: Vec<Pose>) -> Self {
        Self { intrinsics, poses }
    }

    pub fn static_identity(intrinsics: Intrinsics, num_timesteps: usize) -> Self {
        Self::new(intrinsics, vec![Pose::identity(); num_timesteps])
    }

    pub fn num_timesteps(&self) -> usize {
        self.poses.len()
    }

    pub fn pose(&self, t: usize) -> Result<&Pose, CameraError> {
        self.poses.get(t).ok_or(CameraError::TimestepOutOfRange {
            t,
            num_timesteps: self.poses.len(),
        })
    }

    /// Camera-frame point for pixel `(u, v)` at depth `z`; no pose applied.
    #[inline]
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Point3<f64> {
        let k = &self.intrinsics;
        Point3::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z)
    }

    /// Lifts pixel `(u, v)` at camera depth `z` into world coordinates at timestep `t`.
    pub fn unproject(&self, u: f64, v: f64, z: f64, t: usize) -> Result<Point3<f64>, CameraError> {
        if !(z > 0.0) {
            return Err(CameraError::NonPositiveDepth { z, t });
        }
        let pose = self.pose(t)?;
        Ok(pose.apply(&self.backproject(u, v, z)))
    }

    pub fn world_to_camera(&self, p: &Point3<f64>, t: usize) -> Result<Point3<f64>, CameraError> {
        Ok(self.pose(t)?.apply_inverse(p))
    }

    pub fn project(&self, p: &Point3<f64>, t: usize) -> Result<Projection, CameraError> {
        let c = self.world_to_camera(p, t)?;
        if !(c.z > 0.0) {
            return Err(CameraError::BehindCamera { z: c.z, t });
        }
        let k = &self.intrinsics;
        Ok(Projection {
            u: k.fx * c.x / c.z + k.cx,
            v: k.fy * c.y / c.z + k.cy,
            z: c.z,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam(poses: Vec<Pose>) -> CameraModel {
        CameraModel::new(
            Intrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: 50.0,
                cy: 50.0,
            },
            poses,
        )
    }

    #[test]
    fn principal_point_lifts_onto_optical_axis() {
        let c = cam(vec![Pose::identity()]);
        assert_eq!(c.unproject(50.0, 50.0, 2.0, 0).unwrap(), Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn off_axis_pixel() {
        let c = cam(vec![Pose::identity()]);
        assert_eq!(c.unproject(150.0, 50.0, 2.0, 0).unwrap(), Point3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn pose_translation_is_applied() {
        let c = cam(vec![Pose::from_translation(Vector3::new(0.0, 0.0, 1.0))]);
        assert_eq!(c.unproject(50.0, 50.0, 2.0, 0).unwrap(), Point3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn non_positive_depth_is_an_error() {
        let c = cam(vec![Pose::identity()]);
        assert!(matches!(
            c.unproject(1.0, 1.0, 0.0, 0),
            Err(CameraError::NonPositiveDepth { .. })
        ));
        assert!(c.unproject(1.0, 1.0, f64::NAN, 0).is_err());
    }

    fn rotation(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
        *nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw).matrix()
    }

    proptest! {
        #[test]
        fn project_inverts_unproject(
            u in 0.0f64..100.0, v in 0.0f64..100.0, z in 0.05f64..20.0,
            yaw in -3.0f64..3.0, pitch in -1.5f64..1.5, roll in -3.0f64..3.0,
            tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0,
        ) {
            let pose = Pose { rotation: rotation(yaw, pitch, roll), translation: Vector3::new(tx, ty, tz) };
            let c = cam(vec![pose]);
            let p = c.unproject(u, v, z, 0).unwrap();
            let proj = c.project(&p, 0).unwrap();
            prop_assert!((proj.u - u).abs() < 1e-4);
            prop_assert!((proj.v - v).abs() < 1e-4);
            prop_assert!((proj.z - z).abs() < 1e-6);
        }
    }
}
