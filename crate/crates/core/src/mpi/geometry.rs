//! Camera model and the small amount of 3x3 linear algebra the per-plane
//! homographies need.

use super::{MpiError, Result};

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0f64; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1] + self.0[0][2] * v[2],
            self.0[1][0] * v[0] + self.0[1][1] * v[1] + self.0[1][2] * v[2],
            self.0[2][0] * v[0] + self.0[2][1] * v[1] + self.0[2][2] * v[2],
        ]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.det();
        if det.abs() < 1e-14 {
            return None;
        }
        let m = &self.0;
        let inv_det = 1.0 / det;
        let cof = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let mut out = [[0.0f64; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = cof[i][j] * inv_det;
            }
        }
        Some(Mat3(out))
    }
}

/// A rectified stereo rig: pinhole intrinsics plus a horizontal baseline.
/// The reference pose is the identity at the left camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Horizontal separation to the right camera, in scene units.
    pub baseline: f64,
}

impl CameraRig {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, baseline: f64) -> Result<Self> {
        if !(fx > 0.0) || !(fy > 0.0) {
            return Err(MpiError::DegenerateRig { fx, fy });
        }
        if baseline < 0.0 {
            return Err(MpiError::NegativeBaseline(baseline));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            baseline,
        })
    }

    /// Intrinsics as a 3x3 projection matrix.
    pub fn k_matrix(&self) -> Mat3 {
        Mat3([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])
    }

    pub fn k_inverse(&self) -> Mat3 {
        Mat3([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])
    }

    /// Disparity of a fronto-parallel surface at `depth` under this rig.
    pub fn disparity(&self, depth: f64) -> f64 {
        self.fx * self.baseline / depth
    }

    /// Depth of a fronto-parallel surface with the given disparity.
    pub fn depth_for_disparity(&self, disparity: f64) -> f64 {
        self.fx * self.baseline / disparity
    }
}

/// Rigid transform mapping reference-camera coordinates into the target
/// camera's coordinates: `x_target = R * x_ref + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    rotation: Mat3,
    translation: [f64; 3],
}

impl CameraPose {
    /// Validates orthonormality (RᵀR = I within 1e-6) and det(R) = +1.
    pub fn new(rotation: Mat3, translation: [f64; 3]) -> Result<Self> {
        let rtr = rotation.transpose().mul(&rotation);
        let mut err = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((rtr.0[i][j] - target).abs());
            }
        }
        if err > 1e-6 || (rotation.det() - 1.0).abs() > 1e-6 {
            return Err(MpiError::InvalidRotation { error: err });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::IDENTITY,
            translation: [0.0; 3],
        }
    }

    /// Pure translation (reference -> target camera coordinates).
    pub fn translation(tx: f64, ty: f64, tz: f64) -> Self {
        Self {
            rotation: Mat3::IDENTITY,
            translation: [tx, ty, tz],
        }
    }

    /// The right camera of a rectified rig sits `baseline` to the right of
    /// the reference, so reference coordinates shift by `-baseline` in x.
    pub fn right_of_rig(rig: &CameraRig) -> Self {
        Self::translation(-rig.baseline, 0.0, 0.0)
    }

    /// Rotation about the camera's y axis by `angle` radians, then translate.
    pub fn pan_y(angle: f64, translation: [f64; 3]) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]),
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation_vec(&self) -> [f64; 3] {
        self.translation
    }

    pub fn is_identity_rotation(&self) -> bool {
        let mut err = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((self.rotation.0[i][j] - target).abs());
            }
        }
        err < 1e-12
    }

    pub fn is_reference(&self) -> bool {
        self.is_identity_rotation() && self.translation.iter().all(|&t| t == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat3_inverse_roundtrip() {
        let m = Mat3([[2.0, 1.0, 0.5], [0.0, 3.0, -1.0], [1.0, 0.0, 4.0]]);
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((id.0[i][j] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn rig_rejects_zero_focal_length() {
        assert!(CameraRig::new(0.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(CameraRig::new(120.0, 120.0, 127.5, 47.5, 1.0).is_ok());
    }

    #[test]
    fn pose_rejects_non_orthonormal_rotation() {
        let bad = Mat3([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(CameraPose::new(bad, [0.0; 3]).is_err());
        let pan = CameraPose::pan_y(0.3, [0.0; 3]);
        assert!(CameraPose::new(*pan.rotation(), [0.0; 3]).is_ok());
    }

    #[test]
    fn disparity_depth_inverse_pair() {
        let rig = CameraRig::new(120.0, 120.0, 127.5, 47.5, 1.0).unwrap();
        assert_eq!(rig.disparity(30.0), 4.0);
        assert_eq!(rig.depth_for_disparity(4.0), 30.0);
    }
}
