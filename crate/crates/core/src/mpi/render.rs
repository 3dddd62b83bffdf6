//! Novel-view rendering: per-plane inverse homography warping followed by
//! back-to-front alpha compositing.

use crate::imagecore::Image;

use super::estimate::Mpi;
use super::geometry::{CameraPose, CameraRig, Mat3};
use super::{MpiError, Result};

/// Homography mapping reference-plane pixels to target pixels for the
/// fronto-parallel plane `z = depth`, under the pose convention
/// `x_target = R x_ref + t`:
/// `H = K_t (R + t nT / d) K_ref^{-1}` with `n = [0, 0, 1]`.
///
/// A ray through reference pixel p meets the plane at `d * K^-1 p`, whose
/// target projection is `K_t (d R K^-1 p + t) ~ K_t (R + t nT / d) K^-1 p`.
fn plane_homography(
    rig: &CameraRig,
    target: &CameraRig,
    pose: &CameraPose,
    depth: f64,
) -> Mat3 {
    let mut m = *pose.rotation();
    let t = pose.translation_vec();
    for i in 0..3 {
        m.0[i][2] += t[i] / depth;
    }
    target.k_matrix().mul(&m).mul(&rig.k_inverse())
}

/// Sample one plane with alpha-aware bilinear interpolation: samples outside
/// the plane are fully transparent instead of clamping, so planes do not
/// smear their border content into the target view.
fn sample_plane(color: &Image, alpha: &Image, x: f64, y: f64) -> ([f64; 3], f64) {
    let (h, w) = (color.height() as i64, color.width() as i64);
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut rgb = [0.0f64; 3];
    let mut a = 0.0f64;
    for (dy, wy) in [(0i64, 1.0 - fy), (1i64, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1i64, fx)] {
            let wgt = wy * wx;
            if wgt == 0.0 {
                continue;
            }
            let yy = y0 + dy;
            let xx = x0 + dx;
            if yy < 0 || xx < 0 || yy >= h || xx >= w {
                continue; // transparent outside
            }
            let (yy, xx) = (yy as usize, xx as usize);
            let av = alpha.get(yy, xx, 0) as f64;
            a += wgt * av;
            for c in 0..3 {
                rgb[c] += wgt * av * color.get(yy, xx, c) as f64;
            }
        }
    }
    // rgb accumulated premultiplied; unpremultiply for the over operator
    if a > 1e-12 {
        for c in rgb.iter_mut() {
            *c /= a;
        }
    }
    (rgb, a)
}

/// Render the MPI from a new viewpoint. Each plane is warped by the inverse
/// planar homography with bilinear sampling, then composited far to near:
/// `C = sum_i c_i a_i prod_{j>i} (1 - a_j)`.
pub fn render_view(mpi: &Mpi, pose: &CameraPose, target: &CameraRig) -> Result<Image> {
    let (h, w) = (mpi.height(), mpi.width());
    let mut color = vec![0.0f64; h * w * 3];

    for (index, (plane, &depth)) in mpi.planes().iter().zip(mpi.depths()).enumerate() {
        let fwd = plane_homography(mpi.rig(), target, pose, depth);
        let det = fwd.det();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(MpiError::DegenerateHomography { index, depth });
        }
        let inv = fwd
            .inverse()
            .ok_or(MpiError::DegenerateHomography { index, depth })?;
        let identity = homography_is_identity(&fwd);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy, valid) = if identity {
                    (x as f64, y as f64, true)
                } else {
                    let p = inv.mul_vec([x as f64, y as f64, 1.0]);
                    if p[2].abs() < 1e-12 {
                        (0.0, 0.0, false)
                    } else {
                        (p[0] / p[2], p[1] / p[2], p[2] > 0.0)
                    }
                };
                if !valid {
                    continue; // behind the plane; contributes nothing
                }
                let (rgb, a) = sample_plane(&plane.color, &plane.alpha, sx, sy);
                let idx = (y * w + x) * 3;
                for c in 0..3 {
                    color[idx + c] = color[idx + c] * (1.0 - a) + rgb[c] * a;
                }
            }
        }
    }

    Image::from_fn(h, w, 3, |y, x, c| color[(y * w + x) * 3 + c] as f32)
        .map_err(MpiError::Image)
}

fn homography_is_identity(m: &Mat3) -> bool {
    let mut err = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((m.0[i][j] - target).abs());
        }
    }
    err < 1e-13
}

/// Maximum pixel displacement the homography induces over the image corners.
/// Exposed for tests of the identity-pose contract.
pub(crate) fn max_warp_displacement(
    mpi: &Mpi,
    pose: &CameraPose,
    target: &CameraRig,
) -> Result<f64> {
    let (h, w) = (mpi.height() as f64 - 1.0, mpi.width() as f64 - 1.0);
    let mut worst = 0.0f64;
    for (index, &depth) in mpi.depths().iter().enumerate() {
        let fwd = plane_homography(mpi.rig(), target, pose, depth);
        let inv = fwd
            .inverse()
            .ok_or(MpiError::DegenerateHomography { index, depth })?;
        for (x, y) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h), (w / 2.0, h / 2.0)] {
            let p = inv.mul_vec([x, y, 1.0]);
            let dx = p[0] / p[2] - x;
            let dy = p[1] / p[2] - y;
            worst = worst.max((dx * dx + dy * dy).sqrt());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpi::estimate::MpiPlane;

    fn rig() -> CameraRig {
        CameraRig::new(120.0, 120.0, 15.5, 7.5, 1.0).unwrap()
    }

    fn uniform_plane(h: usize, w: usize, value: f32, alpha: f32) -> MpiPlane {
        MpiPlane {
            color: Image::from_vec(h, w, 3, vec![value; h * w * 3]).unwrap(),
            alpha: Image::from_vec(h, w, 1, vec![alpha; h * w]).unwrap(),
        }
    }

    #[test]
    fn two_plane_over_operator_blend() {
        // far plane color 1.0 alpha 1, near plane color 0.0 alpha 0.5:
        // composite = 0.0*0.5 + 1.0*1.0*(1-0.5) = 0.5 everywhere
        let mpi = Mpi::new(
            vec![uniform_plane(8, 12, 1.0, 1.0), uniform_plane(8, 12, 0.0, 0.5)],
            vec![40.0, 20.0],
            rig(),
        )
        .unwrap();
        let img = render_view(&mpi, &CameraPose::identity(), &rig()).unwrap();
        for &v in img.data() {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_pose_renders_nearest_opaque_plane() {
        let near = MpiPlane {
            color: Image::from_fn(8, 12, 3, |y, x, c| ((y + x + c) % 3) as f32 / 2.0).unwrap(),
            alpha: Image::from_vec(8, 12, 1, vec![1.0; 96]).unwrap(),
        };
        let mpi = Mpi::new(
            vec![uniform_plane(8, 12, 0.9, 1.0), near.clone()],
            vec![40.0, 20.0],
            rig(),
        )
        .unwrap();
        let img = render_view(&mpi, &CameraPose::identity(), &rig()).unwrap();
        assert_eq!(img.data(), near.color.data());
    }

    #[test]
    fn identity_pose_has_no_warp_displacement() {
        let mpi = Mpi::new(
            vec![uniform_plane(8, 12, 0.2, 0.7), uniform_plane(8, 12, 0.8, 0.3)],
            vec![40.0, 20.0],
            rig(),
        )
        .unwrap();
        let disp = max_warp_displacement(&mpi, &CameraPose::identity(), &rig()).unwrap();
        assert!(disp < 1e-6, "identity warp displaced by {disp}px");
    }

    #[test]
    fn degenerate_plane_is_rejected_by_index() {
        let mpi = Mpi::new(
            vec![uniform_plane(8, 12, 0.2, 1.0), uniform_plane(8, 12, 0.8, 0.5)],
            vec![40.0, 20.0],
            rig(),
        )
        .unwrap();
        // Camera pushed forward onto the near plane: z_cam = 20 = plane depth.
        let pose = CameraPose::translation(0.0, 0.0, -20.0);
        match render_view(&mpi, &pose, &rig()) {
            Err(MpiError::DegenerateHomography { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected degenerate homography, got {other:?}"),
        }
    }
}
