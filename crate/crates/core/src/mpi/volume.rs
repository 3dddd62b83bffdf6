//! Depth-plane placement and plane-sweep volume construction.

use crate::imagecore::{warp_horizontal, FlowField, Image};

use super::{CameraRig, MpiError, Result};

/// Depth samples uniform in inverse depth (disparity-linear), ordered far to
/// near: index 0 is the farthest plane.
pub fn plane_depths(d_near: f64, d_far: f64, count: usize) -> Result<Vec<f64>> {
    if !(d_near > 0.0) || !(d_far > d_near) {
        return Err(MpiError::InvalidDepthRange {
            near: d_near,
            far: d_far,
        });
    }
    if count < 2 {
        return Err(MpiError::TooFewPlanes(count));
    }
    let inv_far = 1.0 / d_far;
    let inv_near = 1.0 / d_near;
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            1.0 / (inv_far + t * (inv_near - inv_far))
        })
        .collect())
}

/// The `[6, H, W, D]` sweep tensor: channels 0..3 hold the reference (left)
/// RGB repeated across depth, channels 3..6 hold the right view re-projected
/// to each hypothesized depth plane.
#[derive(Debug, Clone)]
pub struct PlaneSweepVolume {
    height: usize,
    width: usize,
    depths: Vec<f64>,
    /// Indexed `[((c * H + y) * W + x) * D + k]`.
    data: Vec<f32>,
}

impl PlaneSweepVolume {
    /// Tensor shape as `[channels, height, width, planes]`.
    pub fn shape(&self) -> [usize; 4] {
        [6, self.height, self.width, self.depths.len()]
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_count(&self) -> usize {
        self.depths.len()
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize, k: usize) -> f32 {
        let d = self.depths.len();
        self.data[((c * self.height + y) * self.width + x) * d + k]
    }

    #[inline]
    fn set(&mut self, c: usize, y: usize, x: usize, k: usize, v: f32) {
        let d = self.depths.len();
        self.data[((c * self.height + y) * self.width + x) * d + k] = v;
    }
}

fn validate_depths(depths: &[f64]) -> Result<()> {
    if depths.len() < 2 {
        return Err(MpiError::TooFewPlanes(depths.len()));
    }
    let positive = depths.iter().all(|&d| d > 0.0);
    let ordered = depths.windows(2).all(|w| w[0] > w[1]);
    if !positive || !ordered {
        return Err(MpiError::UnorderedDepths);
    }
    Ok(())
}

/// Sweep the rectified pair over the depth planes. For a horizontal-baseline
/// rig the per-plane homography reduces to a constant horizontal shift of
/// the right view by the plane's disparity.
pub fn build_psv(
    left: &Image,
    right: &Image,
    rig: &CameraRig,
    depths: &[f64],
) -> Result<PlaneSweepVolume> {
    if !left.same_dims(right) {
        return Err(MpiError::SizeMismatch(
            left.height(),
            left.width(),
            right.height(),
            right.width(),
        ));
    }
    if left.channels() != 3 {
        return Err(MpiError::NotRgb(left.channels()));
    }
    validate_depths(depths)?;
    let (h, w) = (left.height(), left.width());
    let d = depths.len();
    let mut psv = PlaneSweepVolume {
        height: h,
        width: w,
        depths: depths.to_vec(),
        data: vec![0.0; 6 * h * w * d],
    };
    for (k, &depth) in depths.iter().enumerate() {
        // Align the right view onto the left grid at this depth:
        // aligned(x) = right(x - disparity).
        let disp = rig.disparity(depth) as f32;
        let flow = FlowField::constant(h, w, -disp);
        let aligned = warp_horizontal(right, &flow)?;
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    psv.set(c, y, x, k, left.get(y, x, c));
                    psv.set(c + 3, y, x, k, aligned.get(y, x, c));
                }
            }
        }
    }
    Ok(psv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_depths_two_planes_are_range_ends() {
        let d = plane_depths(1.0, 100.0, 2).unwrap();
        assert_eq!(d, vec![100.0, 1.0]);
    }

    #[test]
    fn plane_depths_inverse_depth_spacing() {
        let d = plane_depths(1.0, 100.0, 3).unwrap();
        assert!((d[0] - 100.0).abs() < 1e-12);
        assert!((d[1] - 1.0 / 0.505).abs() < 1e-9, "mid plane {}", d[1]);
        assert!((d[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_depths_rejects_bad_range() {
        assert!(plane_depths(5.0, 2.0, 8).is_err());
        assert!(plane_depths(0.0, 2.0, 8).is_err());
        assert!(plane_depths(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn psv_shape_is_6_h_w_d() {
        let left = Image::new(96, 256, 3).unwrap();
        let right = Image::new(96, 256, 3).unwrap();
        let rig = CameraRig::new(120.0, 120.0, 127.5, 47.5, 1.0).unwrap();
        let depths = plane_depths(10.0, 120.0, 32).unwrap();
        let psv = build_psv(&left, &right, &rig, &depths).unwrap();
        assert_eq!(psv.shape(), [6, 96, 256, 32]);
    }

    #[test]
    fn psv_zero_baseline_keeps_right_unwarped() {
        let rig = CameraRig::new(120.0, 120.0, 15.5, 7.5, 0.0).unwrap();
        let right = Image::from_fn(16, 32, 3, |y, x, c| ((y * 7 + x * 3 + c) % 9) as f32 / 8.0)
            .unwrap();
        let left = Image::new(16, 32, 3).unwrap();
        let depths = plane_depths(5.0, 50.0, 4).unwrap();
        let psv = build_psv(&left, &right, &rig, &depths).unwrap();
        for k in 0..4 {
            for y in 0..16 {
                for x in 0..32 {
                    for c in 0..3 {
                        assert_eq!(psv.get(c + 3, y, x, k), right.get(y, x, c));
                    }
                }
            }
        }
    }

    #[test]
    fn psv_size_mismatch_rejected() {
        let left = Image::new(8, 16, 3).unwrap();
        let right = Image::new(8, 24, 3).unwrap();
        let rig = CameraRig::new(120.0, 120.0, 7.5, 3.5, 1.0).unwrap();
        let depths = plane_depths(5.0, 50.0, 4).unwrap();
        assert!(build_psv(&left, &right, &rig, &depths).is_err());
    }
}
