//! PSNR and SSIM on unit-range images.

use super::{Image, ImageError, Result};

/// Side length of the SSIM comparison window.
pub const SSIM_WINDOW: usize = 11;

const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Peak signal-to-noise ratio in decibels over `[0, 1]`-range images.
///
/// Identical inputs have zero MSE; that case is reported as the
/// `f64::INFINITY` sentinel rather than a fault.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(ImageError::DimensionMismatch(
            a.height(),
            a.width(),
            b.height(),
            b.width(),
        ));
    }
    let mut acc = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = (*x - *y) as f64;
        acc += d * d;
    }
    let mse = acc / a.data().len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-10.0 * mse.log10())
    }
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0f64; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable Gaussian filter; returns the valid region only
/// ((H-10) x (W-10) for the 11-tap kernel).
fn gauss_filter_valid(src: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = SSIM_WINDOW - 1;
    let wv = w - r;
    // horizontal pass
    let mut tmp = vec![0.0f64; h * wv];
    for y in 0..h {
        for x in 0..wv {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * src[y * w + x + i];
            }
            tmp[y * wv + x] = s;
        }
    }
    // vertical pass
    let hv = h - r;
    let mut out = vec![0.0f64; hv * wv];
    for y in 0..hv {
        for x in 0..wv {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * tmp[(y + i) * wv + x];
            }
            out[y * wv + x] = s;
        }
    }
    out
}

/// Mean local SSIM with an 11-tap Gaussian window (sigma 1.5) and the
/// standard stabilizers C1=(0.01)^2, C2=(0.03)^2 on unit dynamic range.
/// Channels are scored independently and averaged.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(ImageError::DimensionMismatch(
            a.height(),
            a.width(),
            b.height(),
            b.width(),
        ));
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(ImageError::TooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_kernel();
    let mut total = 0.0f64;
    for c in 0..a.channels() {
        let xa: Vec<f64> = (0..h * w)
            .map(|i| a.data()[i * a.channels() + c] as f64)
            .collect();
        let xb: Vec<f64> = (0..h * w)
            .map(|i| b.data()[i * b.channels() + c] as f64)
            .collect();
        let sq_a: Vec<f64> = xa.iter().map(|v| v * v).collect();
        let sq_b: Vec<f64> = xb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x * y).collect();

        let mu_a = gauss_filter_valid(&xa, h, w, &k);
        let mu_b = gauss_filter_valid(&xb, h, w, &k);
        let m_aa = gauss_filter_valid(&sq_a, h, w, &k);
        let m_bb = gauss_filter_valid(&sq_b, h, w, &k);
        let m_ab = gauss_filter_valid(&ab, h, w, &k);

        let mut acc = 0.0f64;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = m_aa[i] - ma * ma;
            let vb = m_bb[i] - mb * mb;
            let cov = m_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
            acc += num / den;
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / a.channels() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Image;

    /// Direct sliding-window SSIM, non-separable, as an independent oracle.
    fn ssim_direct(a: &Image, b: &Image) -> f64 {
        let k = gaussian_kernel();
        let (h, w) = (a.height(), a.width());
        let mut total = 0.0f64;
        for c in 0..a.channels() {
            let mut acc = 0.0f64;
            let mut n = 0usize;
            for y0 in 0..=h - SSIM_WINDOW {
                for x0 in 0..=w - SSIM_WINDOW {
                    let (mut ma, mut mb) = (0.0f64, 0.0f64);
                    let (mut maa, mut mbb, mut mab) = (0.0f64, 0.0f64, 0.0f64);
                    for dy in 0..SSIM_WINDOW {
                        for dx in 0..SSIM_WINDOW {
                            let wgt = k[dy] * k[dx];
                            let va = a.get(y0 + dy, x0 + dx, c) as f64;
                            let vb = b.get(y0 + dy, x0 + dx, c) as f64;
                            ma += wgt * va;
                            mb += wgt * vb;
                            maa += wgt * va * va;
                            mbb += wgt * vb * vb;
                            mab += wgt * va * vb;
                        }
                    }
                    let va = maa - ma * ma;
                    let vb = mbb - mb * mb;
                    let cov = mab - ma * mb;
                    let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
                    let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
                    acc += num / den;
                    n += 1;
                }
            }
            total += acc / n as f64;
        }
        total / a.channels() as f64
    }

    fn textured(h: usize, w: usize, seed: u64) -> Image {
        Image::from_fn(h, w, 3, |y, x, c| {
            let v = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(((y * w + x) * 3 + c) as u64 * 1442695040888963407);
            ((v >> 33) % 1000) as f32 / 999.0
        })
        .unwrap()
    }

    #[test]
    fn psnr_identical_is_infinite_sentinel() {
        let img = textured(8, 8, 3);
        assert!(psnr(&img, &img).unwrap().is_infinite());
    }

    #[test]
    fn psnr_uniform_differences_closed_form() {
        let a = Image::from_vec(2, 2, 1, vec![0.5; 4]).unwrap();
        let b = Image::from_vec(2, 2, 1, vec![0.6; 4]).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-4);
        let c = Image::from_vec(2, 2, 1, vec![0.51; 4]).unwrap();
        assert!((psnr(&a, &c).unwrap() - 40.0).abs() < 1e-3);
    }

    #[test]
    fn psnr_symmetric() {
        let a = textured(6, 7, 1);
        let b = textured(6, 7, 2);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn ssim_self_is_one() {
        let img = textured(16, 20, 9);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_matches_direct_oracle() {
        let a = textured(14, 18, 5);
        let b = textured(14, 18, 6);
        let fast = ssim(&a, &b).unwrap();
        let slow = ssim_direct(&a, &b);
        assert!((fast - slow).abs() < 1e-4, "fast={fast} slow={slow}");
    }

    #[test]
    fn ssim_anticorrelated_checkerboard_approaches_minus_one() {
        // 0/1 checkerboard against its inverse: means sit near 0.5
        // (luminance term ~1) while covariance is maximally negative, so
        // the score approaches (C2 - 2*0.25) / (C2 + 2*0.25) ~ -0.996.
        let a = Image::from_fn(24, 24, 1, |y, x, _| ((y + x) % 2) as f32).unwrap();
        let b = Image::from_fn(24, 24, 1, |y, x, _| ((y + x + 1) % 2) as f32).unwrap();
        let s = ssim(&a, &b).unwrap();
        let oracle = ssim_direct(&a, &b);
        assert!((s - oracle).abs() < 1e-6);
        assert!(s < -0.9, "anti-correlated SSIM should approach -1, got {s}");
    }

    #[test]
    fn ssim_rejects_small_images() {
        let img = Image::new(10, 32, 1).unwrap();
        assert!(matches!(
            ssim(&img, &img),
            Err(ImageError::TooSmall { .. })
        ));
    }
}
