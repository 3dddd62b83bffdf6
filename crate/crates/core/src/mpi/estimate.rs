//! Photoconsistency-based MPI estimation from a plane-sweep volume.

use crate::imagecore::Image;

use super::volume::PlaneSweepVolume;
use super::{CameraRig, MpiError, Result};

/// One fronto-parallel RGB-alpha plane.
#[derive(Debug, Clone)]
pub struct MpiPlane {
    pub color: Image,
    /// Single-channel transparency in `[0, 1]`.
    pub alpha: Image,
}

/// A multiplane image: RGB-alpha planes at fixed depths ordered far to near,
/// tied to the reference rig. Equivalent to a `[4, H, W, D]` tensor.
#[derive(Debug, Clone)]
pub struct Mpi {
    planes: Vec<MpiPlane>,
    depths: Vec<f64>,
    rig: CameraRig,
}

impl Mpi {
    pub fn new(planes: Vec<MpiPlane>, depths: Vec<f64>, rig: CameraRig) -> Result<Self> {
        if planes.len() != depths.len() || planes.len() < 2 {
            return Err(MpiError::PlaneCountMismatch {
                got: planes.len(),
                expected: depths.len(),
            });
        }
        let positive = depths.iter().all(|&d| d > 0.0);
        let ordered = depths.windows(2).all(|w| w[0] > w[1]);
        if !positive || !ordered {
            return Err(MpiError::UnorderedDepths);
        }
        let (h, w) = (planes[0].color.height(), planes[0].color.width());
        for p in &planes {
            if p.color.height() != h
                || p.color.width() != w
                || p.alpha.height() != h
                || p.alpha.width() != w
            {
                return Err(MpiError::SizeMismatch(
                    h,
                    w,
                    p.alpha.height(),
                    p.alpha.width(),
                ));
            }
            if p.color.channels() != 3 {
                return Err(MpiError::NotRgb(p.color.channels()));
            }
        }
        Ok(Self {
            planes,
            depths,
            rig,
        })
    }

    /// Tensor shape as `[4, H, W, D]` (RGB + alpha per plane).
    pub fn shape(&self) -> [usize; 4] {
        [
            4,
            self.planes[0].color.height(),
            self.planes[0].color.width(),
            self.planes.len(),
        ]
    }

    pub fn planes(&self) -> &[MpiPlane] {
        &self.planes
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn rig(&self) -> &CameraRig {
        &self.rig
    }

    pub fn height(&self) -> usize {
        self.planes[0].color.height()
    }

    pub fn width(&self) -> usize {
        self.planes[0].color.width()
    }

    /// Per-pixel compositing weight of every plane: `w_i = a_i * prod_{j>i}
    /// (1 - a_j)` with index D-1 nearest. Mostly useful for diagnostics and
    /// tests of the partition property.
    pub fn compositing_weights(&self, y: usize, x: usize) -> Vec<f64> {
        let d = self.planes.len();
        let mut weights = vec![0.0f64; d];
        let mut trans = 1.0f64;
        for i in (0..d).rev() {
            let a = self.planes[i].alpha.get(y, x, 0) as f64;
            weights[i] = a * trans;
            trans *= 1.0 - a;
        }
        weights
    }
}

/// Matching cost per pixel and plane: channel-mean absolute difference of
/// the two PSV halves, box-filtered 3x3 within each slice.
fn matching_costs(psv: &PlaneSweepVolume) -> Vec<f64> {
    let (h, w, d) = (psv.height(), psv.width(), psv.plane_count());
    let mut raw = vec![0.0f64; h * w * d];
    for y in 0..h {
        for x in 0..w {
            for k in 0..d {
                let mut c = 0.0f64;
                for ch in 0..3 {
                    c += (psv.get(ch, y, x, k) - psv.get(ch + 3, y, x, k)).abs() as f64;
                }
                raw[(y * w + x) * d + k] = c / 3.0;
            }
        }
    }
    // 3x3 box filter with a window shrunk at the borders
    let mut filtered = vec![0.0f64; h * w * d];
    for y in 0..h {
        let y0 = y.saturating_sub(1);
        let y1 = (y + 1).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let n = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            for k in 0..d {
                let mut s = 0.0f64;
                for yy in y0..=y1 {
                    for xx in x0..=x1 {
                        s += raw[(yy * w + xx) * d + k];
                    }
                }
                filtered[(y * w + x) * d + k] = s / n;
            }
        }
    }
    filtered
}

/// Deterministic MPI estimation honoring the `[6,H,W,D] -> [4,H,W,D]`
/// contract: per-pixel softmin over matching cost picks depth weights, and
/// alphas are derived so back-to-front compositing reproduces those weights
/// exactly. Plane colors are the reference (left) image.
///
/// All-equal costs (textureless input) degrade gracefully to uniform
/// weights, never a fault.
pub fn estimate_mpi(
    psv: &PlaneSweepVolume,
    rig: &CameraRig,
    depths: &[f64],
    temperature: f64,
) -> Result<Mpi> {
    if depths.len() != psv.plane_count() {
        return Err(MpiError::PlaneCountMismatch {
            got: depths.len(),
            expected: psv.plane_count(),
        });
    }
    let temperature = if temperature > 0.0 { temperature } else { 1e-3 };
    let (h, w, d) = (psv.height(), psv.width(), psv.plane_count());
    let costs = matching_costs(psv);

    // Reference color is shared by every plane.
    let left = Image::from_fn(h, w, 3, |y, x, c| psv.get(c, y, x, 0))?;

    let mut alphas: Vec<Vec<f32>> = vec![vec![0.0f32; h * w]; d];
    let mut weights = vec![0.0f64; d];
    for y in 0..h {
        for x in 0..w {
            let slice = &costs[(y * w + x) * d..(y * w + x + 1) * d];
            let cmin = slice.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut sum = 0.0f64;
            for k in 0..d {
                let e = (-(slice[k] - cmin) / temperature).exp();
                weights[k] = e;
                sum += e;
            }
            for wk in weights.iter_mut() {
                *wk /= sum;
            }
            // Back-to-front inversion: alpha_i = w_i / prod_{j>i}(1 - alpha_j),
            // where the product equals the transmittance left by nearer planes.
            let mut trans = 1.0f64;
            for k in (0..d).rev() {
                let a = if trans > 1e-12 {
                    (weights[k] / trans).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                alphas[k][y * w + x] = a as f32;
                trans *= 1.0 - a;
            }
        }
    }

    let planes = alphas
        .into_iter()
        .map(|a| {
            Ok(MpiPlane {
                color: left.clone(),
                alpha: Image::from_vec(h, w, 1, a)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Mpi::new(planes, depths.to_vec(), *rig)
}
