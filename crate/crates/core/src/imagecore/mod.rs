//! Pixel containers, bilinear sampling, horizontal warping, quality metrics,
//! and image file I/O shared by every pipeline stage.
//!
//! All intensities live in `[0, 1]`. Out-of-bounds sampling clamps
//! coordinates to the border so warps never inject synthetic black fringes.

mod io;
mod metrics;

pub use io::{
    load_confidence_pgm, load_image, load_mask_pgm, load_rgba_png, save_confidence_pgm,
    save_image, save_image_16, save_mask_pgm, save_rgba_png,
};
pub use metrics::{psnr, ssim, SSIM_WINDOW};

use thiserror::Error;

/// Errors produced by image containers, operations, and file I/O.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid channel count {0} (expected 1 or 3)")]
    InvalidChannels(usize),
    #[error("data length {got} does not match height*width*channels = {expected}")]
    DataLength { got: usize, expected: usize },
    #[error("empty image: {0}x{1}")]
    EmptyImage(usize, usize),
    #[error("crop fraction {0} outside [0, 0.5)")]
    InvalidCropFraction(f32),
    #[error("image {height}x{width} smaller than the {window}x{window} comparison window")]
    TooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("mask value {0} is not binary")]
    NonBinaryMask(f32),
    #[error("unsupported image format for {0}")]
    UnsupportedFormat(String),
    #[error("malformed {kind} file {path}: {detail}")]
    Malformed {
        kind: &'static str,
        path: String,
        detail: String,
    },
    #[error("value {value} at index {index} outside the representable range of {what}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        value: f32,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("png error on {path}: {detail}")]
    Png { path: String, detail: String },
}

pub type Result<T> = std::result::Result<T, ImageError>;

fn clamp01(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

/// An H×W×C raster of intensities in `[0, 1]`, row-major, C ∈ {1, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    /// All-zero image. Channels must be 1 or 3.
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidChannels(channels));
        }
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage(height, width));
        }
        Ok(Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        })
    }

    /// Wrap raw row-major data; values are clamped into `[0, 1]`.
    pub fn from_vec(height: usize, width: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidChannels(channels));
        }
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage(height, width));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(ImageError::DataLength {
                got: data.len(),
                expected,
            });
        }
        for v in &mut data {
            *v = clamp01(*v);
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Build from a per-pixel closure `(y, x, c) -> value` (clamped).
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut img = Self::new(height, width, channels)?;
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let v = clamp01(f(y, x, c));
                    img.data[(y * width + x) * channels + c] = v;
                }
            }
        }
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Set one sample (clamped into `[0, 1]`).
    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = clamp01(v);
    }

    /// Bilinear sample of a single channel at real coordinates, with
    /// coordinates clamped to the image border. Exact at integer coordinates.
    pub fn bilinear_sample_channel(&self, c: usize, x: f32, y: f32) -> f32 {
        let xc = x.clamp(0.0, (self.width - 1) as f32);
        let yc = y.clamp(0.0, (self.height - 1) as f32);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let fx = xc - x0 as f32;
        let fy = yc - y0 as f32;
        // Exact fetch on the lattice avoids needless rounding.
        if fx == 0.0 && fy == 0.0 {
            return self.get(y0, x0, c);
        }
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let v00 = self.get(y0, x0, c);
        let v10 = self.get(y0, x1, c);
        let v01 = self.get(y1, x0, c);
        let v11 = self.get(y1, x1, c);
        let top = v00 + fx * (v10 - v00);
        let bot = v01 + fx * (v11 - v01);
        top + fy * (bot - top)
    }

    /// Bilinear sample of every channel; entries past `channels()` are zero.
    pub fn bilinear_sample(&self, x: f32, y: f32) -> [f32; 3] {
        let mut out = [0.0f32; 3];
        for (c, slot) in out.iter_mut().enumerate().take(self.channels) {
            *slot = self.bilinear_sample_channel(c, x, y);
        }
        out
    }

    /// Mean over channels at one pixel.
    pub fn channel_mean(&self, y: usize, x: usize) -> f32 {
        let base = (y * self.width + x) * self.channels;
        let s: f32 = self.data[base..base + self.channels].iter().sum();
        s / self.channels as f32
    }
}

/// Per-pixel horizontal displacement in pixels (signed); no vertical
/// component exists by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    dx: Vec<f32>,
}

impl FlowField {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            dx: vec![0.0; height * width],
        }
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            dx: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, dx: Vec<f32>) -> Result<Self> {
        if dx.len() != height * width {
            return Err(ImageError::DataLength {
                got: dx.len(),
                expected: height * width,
            });
        }
        Ok(Self { height, width, dx })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.dx[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.dx[y * self.width + x] = v;
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    /// Negate every displacement (maps a left→right flow to right→left).
    pub fn negated(&self) -> FlowField {
        FlowField {
            height: self.height,
            width: self.width,
            dx: self.dx.iter().map(|d| -d).collect(),
        }
    }
}

/// An H×W map of confidences in `[0, 1]` (values are clamped on entry).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ConfidenceMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, mut values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(ImageError::DataLength {
                got: values.len(),
                expected: height * width,
            });
        }
        for v in &mut values {
            *v = clamp01(*v);
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.values[y * self.width + x] = clamp01(v);
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mean(&self) -> f32 {
        self.values.iter().sum::<f32>() / self.values.len() as f32
    }
}

/// A strictly binary H×W mask stored as 0/1 bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != height * width {
            return Err(ImageError::DataLength {
                got: values.len(),
                expected: height * width,
            });
        }
        if let Some(&bad) = values.iter().find(|&&v| v > 1) {
            return Err(ImageError::NonBinaryMask(bad as f32));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.values[y * self.width + x] = v as u8;
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn fraction_ones(&self) -> f32 {
        self.count_ones() as f32 / self.values.len() as f32
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    /// 3×3 (8-neighborhood) dilation.
    pub fn dilate3(&self) -> BinaryMask {
        let mut out = BinaryMask::zeros(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut hit = false;
                'scan: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let ny = y as i64 + dy;
                        let nx = x as i64 + dx;
                        if ny >= 0
                            && nx >= 0
                            && (ny as usize) < self.height
                            && (nx as usize) < self.width
                            && self.get(ny as usize, nx as usize) == 1
                        {
                            hit = true;
                            break 'scan;
                        }
                    }
                }
                out.set(y, x, hit);
            }
        }
        out
    }

    /// 3×3 (8-neighborhood) erosion. Pixels outside the image count as 0.
    pub fn erode3(&self) -> BinaryMask {
        let mut out = BinaryMask::zeros(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut all = true;
                'scan: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let ny = y as i64 + dy;
                        let nx = x as i64 + dx;
                        if ny < 0
                            || nx < 0
                            || ny as usize >= self.height
                            || nx as usize >= self.width
                            || self.get(ny as usize, nx as usize) == 0
                        {
                            all = false;
                            break 'scan;
                        }
                    }
                }
                out.set(y, x, all);
            }
        }
        out
    }

    /// Morphological closing (dilate then erode) with a 3×3 element.
    pub fn close3(&self) -> BinaryMask {
        self.dilate3().erode3()
    }
}

/// Backward horizontal warp: `out(x, y) = src(x + flow(x, y), y)` with
/// border-clamped bilinear sampling. Zero flow is the exact identity.
pub fn warp_horizontal(src: &Image, flow: &FlowField) -> Result<Image> {
    if src.height() != flow.height() || src.width() != flow.width() {
        return Err(ImageError::DimensionMismatch(
            src.height(),
            src.width(),
            flow.height(),
            flow.width(),
        ));
    }
    let mut out = Image::new(src.height, src.width, src.channels)?;
    for y in 0..src.height {
        for x in 0..src.width {
            let sx = x as f32 + flow.get(y, x);
            for c in 0..src.channels {
                let v = src.bilinear_sample_channel(c, sx, y as f32);
                out.data[(y * src.width + x) * src.channels + c] = v;
            }
        }
    }
    Ok(out)
}

/// Channel-mean absolute difference, affinely rescaled so the largest
/// difference maps to 1. An all-zero difference stays all zero.
pub fn pixel_difference(a: &Image, b: &Image) -> Result<ConfidenceMap> {
    if !a.same_dims(b) {
        return Err(ImageError::DimensionMismatch(
            a.height(),
            a.width(),
            b.height(),
            b.width(),
        ));
    }
    let mut values = vec![0.0f32; a.height * a.width];
    let mut max = 0.0f32;
    for y in 0..a.height {
        for x in 0..a.width {
            let mut d = 0.0f32;
            for c in 0..a.channels {
                d += (a.get(y, x, c) - b.get(y, x, c)).abs();
            }
            d /= a.channels as f32;
            values[y * a.width + x] = d;
            if d > max {
                max = d;
            }
        }
    }
    if max > 0.0 {
        for v in &mut values {
            *v /= max;
        }
    }
    ConfidenceMap::from_vec(a.height, a.width, values)
}

/// Remove `floor(fraction*height)` rows top and bottom and
/// `floor(fraction*width)` columns left and right.
pub fn crop_border(img: &Image, fraction: f32) -> Result<Image> {
    if !(0.0..0.5).contains(&fraction) || !fraction.is_finite() {
        return Err(ImageError::InvalidCropFraction(fraction));
    }
    let dy = (fraction * img.height as f32).floor() as usize;
    let dx = (fraction * img.width as f32).floor() as usize;
    if dy == 0 && dx == 0 {
        return Ok(img.clone());
    }
    let nh = img.height - 2 * dy;
    let nw = img.width - 2 * dx;
    Image::from_fn(nh, nw, img.channels, |y, x, c| img.get(y + dy, x + dx, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_row() -> Image {
        Image::from_vec(1, 5, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap()
    }

    #[test]
    fn bilinear_exact_at_integer_coords() {
        let img = Image::from_vec(2, 3, 1, vec![0.1, 0.5, 0.9, 0.2, 0.6, 1.0]).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(
                    img.bilinear_sample_channel(0, x as f32, y as f32),
                    img.get(y, x, 0)
                );
            }
        }
    }

    #[test]
    fn bilinear_linear_interpolation_on_ramp() {
        let img = Image::from_vec(1, 2, 1, vec![0.0, 1.0]).unwrap();
        assert!((img.bilinear_sample_channel(0, 0.5, 0.0) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn bilinear_hand_evaluated_2x2() {
        // rows [0,1] and [0,1]; at (x=0.25, y=0.5) the bilinear formula gives 0.25
        let img = Image::from_vec(2, 2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((img.bilinear_sample_channel(0, 0.25, 0.5) - 0.25).abs() < 1e-7);
    }

    #[test]
    fn bilinear_clamps_out_of_bounds() {
        let img = Image::from_vec(1, 2, 1, vec![0.3, 0.8]).unwrap();
        assert_eq!(img.bilinear_sample_channel(0, -5.0, 0.0), 0.3);
        assert_eq!(img.bilinear_sample_channel(0, 7.0, 3.0), 0.8);
    }

    #[test]
    fn warp_zero_flow_is_identity() {
        let img = Image::from_fn(7, 9, 3, |y, x, c| {
            ((y * 31 + x * 7 + c * 3) % 11) as f32 / 10.0
        })
        .unwrap();
        let flow = FlowField::new(7, 9);
        let out = warp_horizontal(&img, &flow).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn warp_integer_flow_matches_column_roll() {
        // flow +3 with content padded so the shift stays in bounds
        let w = 12;
        let img = Image::from_fn(4, w, 1, |y, x, _| ((y * 5 + x * 13) % 9) as f32 / 8.0).unwrap();
        let flow = FlowField::constant(4, w, 3.0);
        let out = warp_horizontal(&img, &flow).unwrap();
        for y in 0..4 {
            for x in 0..w - 3 {
                assert_eq!(out.get(y, x, 0), img.get(y, x + 3, 0), "at ({y},{x})");
            }
        }
    }

    #[test]
    fn warp_half_pixel_on_ramp() {
        let img = ramp_row();
        let flow = FlowField::constant(1, 5, 0.5);
        let out = warp_horizontal(&img, &flow).unwrap();
        let expect = [0.125, 0.375, 0.625, 0.875, 1.0]; // last sample clamps
        for (x, e) in expect.iter().enumerate() {
            assert!((out.get(0, x, 0) - e).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn warp_dimension_mismatch_rejected() {
        let img = ramp_row();
        let flow = FlowField::new(2, 5);
        assert!(matches!(
            warp_horizontal(&img, &flow),
            Err(ImageError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn pixel_difference_equal_inputs_all_zero() {
        let img = ramp_row();
        let d = pixel_difference(&img, &img).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pixel_difference_single_pixel_normalizes_to_one() {
        let a = Image::new(3, 3, 1).unwrap();
        let mut b = Image::new(3, 3, 1).unwrap();
        b.set(1, 2, 0, 0.25);
        let d = pixel_difference(&a, &b).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                let want = if (y, x) == (1, 2) { 1.0 } else { 0.0 };
                assert_eq!(d.get(y, x), want);
            }
        }
    }

    #[test]
    fn pixel_difference_rescales_by_max() {
        let a = Image::new(1, 3, 1).unwrap();
        let b = Image::from_vec(1, 3, 1, vec![0.1, 0.2, 0.4]).unwrap();
        let d = pixel_difference(&a, &b).unwrap();
        let got: Vec<f32> = d.values().to_vec();
        for (g, e) in got.iter().zip([0.25, 0.5, 1.0]) {
            assert!((g - e).abs() < 1e-6);
        }
    }

    #[test]
    fn crop_border_zero_identity_and_floor_semantics() {
        let img = Image::from_fn(100, 200, 1, |y, x, _| ((y + x) % 7) as f32 / 6.0).unwrap();
        assert_eq!(crop_border(&img, 0.0).unwrap(), img);
        let c = crop_border(&img, 0.05).unwrap();
        assert_eq!((c.height(), c.width()), (90, 180));
        // floor per side: 384 - 2*floor(19.2) = 346, 128 - 2*floor(6.4) = 116
        let img2 = Image::new(384, 128, 1).unwrap();
        let c2 = crop_border(&img2, 0.05).unwrap();
        assert_eq!((c2.height(), c2.width()), (346, 116));
    }

    #[test]
    fn crop_border_rejects_out_of_range() {
        let img = ramp_row();
        assert!(crop_border(&img, 0.5).is_err());
        assert!(crop_border(&img, -0.1).is_err());
    }

    #[test]
    fn mask_rejects_non_binary() {
        assert!(BinaryMask::from_vec(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn close3_fills_single_pixel_hole() {
        let mut m = BinaryMask::zeros(7, 7);
        for y in 2..5 {
            for x in 2..5 {
                m.set(y, x, true);
            }
        }
        m.set(3, 3, false);
        let closed = m.close3();
        assert_eq!(closed.get(3, 3), 1);
    }

    proptest! {
        #[test]
        fn prop_warp_zero_flow_identity(h in 1usize..6, w in 1usize..8, seed in 0u64..1000) {
            let img = Image::from_fn(h, w, 1, |y, x, _| {
                let v = seed.wrapping_mul(31).wrapping_add((y * w + x) as u64 * 977) % 101;
                v as f32 / 100.0
            }).unwrap();
            let out = warp_horizontal(&img, &FlowField::new(h, w)).unwrap();
            prop_assert_eq!(out, img);
        }

        #[test]
        fn prop_pixel_difference_in_unit_range(vals in proptest::collection::vec(0.0f32..1.0, 12)) {
            let a = Image::from_vec(3, 4, 1, vals.clone()).unwrap();
            let b = Image::from_vec(3, 4, 1, vals.iter().map(|v| 1.0 - v).collect()).unwrap();
            let d = pixel_difference(&a, &b).unwrap();
            prop_assert!(d.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let equal = a == b;
            let all_zero = d.values().iter().all(|&v| v == 0.0);
            prop_assert_eq!(equal, all_zero);
        }
    }
}
