//! Image file I/O: 8/16-bit PNG (grayscale/RGB/RGBA), binary PPM (P6), and
//! grayscale PGM (P5) for masks, confidence maps, and fixed-point disparity.
//!
//! Stored integers map linearly onto `[0, 1]` (v / maxval).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{BinaryMask, ConfidenceMap, Image, ImageError, Result};

fn io_err(path: &Path, source: std::io::Error) -> ImageError {
    ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> ImageError {
    ImageError::Png {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

fn malformed(kind: &'static str, path: &Path, detail: impl Into<String>) -> ImageError {
    ImageError::Malformed {
        kind,
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Load a PNG (8/16-bit grayscale or RGB) or binary PPM/PGM into an [`Image`].
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "png" => load_png(path),
        "ppm" | "pgm" => load_pnm(path),
        other => Err(ImageError::UnsupportedFormat(format!(
            "{} (extension {other:?})",
            path.display()
        ))),
    }
}

/// Save an [`Image`] at 8-bit depth; the format follows the file extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    save_with_depth(img, path.as_ref(), 8)
}

/// Save an [`Image`] at 16-bit depth; the format follows the file extension.
pub fn save_image_16(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    save_with_depth(img, path.as_ref(), 16)
}

fn save_with_depth(img: &Image, path: &Path, depth: u8) -> Result<()> {
    match extension(path).as_str() {
        "png" => save_png(img, path, depth),
        "ppm" => {
            if img.channels() != 3 {
                return Err(ImageError::InvalidChannels(img.channels()));
            }
            save_pnm(img, path, depth, b'6')
        }
        "pgm" => {
            if img.channels() != 1 {
                return Err(ImageError::InvalidChannels(img.channels()));
            }
            save_pnm(img, path, depth, b'5')
        }
        other => Err(ImageError::UnsupportedFormat(format!(
            "{} (extension {other:?})",
            path.display()
        ))),
    }
}

fn quantize(v: f32, maxval: u32) -> u32 {
    (v * maxval as f32).round().clamp(0.0, maxval as f32) as u32
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

fn load_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(ImageError::UnsupportedFormat(format!(
                "{}: png color type {other:?}",
                path.display()
            )))
        }
    };
    let data = decode_samples(&buf[..info.buffer_size()], info.bit_depth, path)?;
    if data.len() != w * h * channels {
        return Err(malformed("png", path, "sample count mismatch"));
    }
    Image::from_vec(h, w, channels, data)
}

fn decode_samples(buf: &[u8], depth: png::BitDepth, path: &Path) -> Result<Vec<f32>> {
    match depth {
        png::BitDepth::Eight => Ok(buf.iter().map(|&b| b as f32 / 255.0).collect()),
        png::BitDepth::Sixteen => {
            if buf.len() % 2 != 0 {
                return Err(malformed("png", path, "odd byte count for 16-bit data"));
            }
            Ok(buf
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 65535.0)
                .collect())
        }
        other => Err(ImageError::UnsupportedFormat(format!(
            "{}: png bit depth {other:?}",
            path.display()
        ))),
    }
}

fn save_png(img: &Image, path: &Path, depth: u8) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut enc = png::Encoder::new(
        BufWriter::new(file),
        img.width() as u32,
        img.height() as u32,
    );
    enc.set_color(if img.channels() == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    enc.set_depth(if depth == 8 {
        png::BitDepth::Eight
    } else {
        png::BitDepth::Sixteen
    });
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    let bytes = encode_samples(img.data(), depth);
    writer.write_image_data(&bytes).map_err(|e| png_err(path, e))
}

fn encode_samples(data: &[f32], depth: u8) -> Vec<u8> {
    if depth == 8 {
        data.iter().map(|&v| quantize(v, 255) as u8).collect()
    } else {
        let mut out = Vec::with_capacity(data.len() * 2);
        for &v in data {
            out.extend_from_slice(&(quantize(v, 65535) as u16).to_be_bytes());
        }
        out
    }
}

/// Save an RGB image and a single-channel alpha image as one RGBA PNG.
pub fn save_rgba_png(color: &Image, alpha: &Image, path: impl AsRef<Path>, depth: u8) -> Result<()> {
    let path = path.as_ref();
    if color.channels() != 3 {
        return Err(ImageError::InvalidChannels(color.channels()));
    }
    if alpha.channels() != 1
        || color.height() != alpha.height()
        || color.width() != alpha.width()
    {
        return Err(ImageError::DimensionMismatch(
            color.height(),
            color.width(),
            alpha.height(),
            alpha.width(),
        ));
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut enc = png::Encoder::new(
        BufWriter::new(file),
        color.width() as u32,
        color.height() as u32,
    );
    enc.set_color(png::ColorType::Rgba);
    enc.set_depth(if depth == 8 {
        png::BitDepth::Eight
    } else {
        png::BitDepth::Sixteen
    });
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    let n = color.height() * color.width();
    let mut interleaved = Vec::with_capacity(n * 4);
    for i in 0..n {
        interleaved.extend_from_slice(&color.data()[i * 3..i * 3 + 3]);
        interleaved.push(alpha.data()[i]);
    }
    let bytes = encode_samples(&interleaved, depth);
    writer.write_image_data(&bytes).map_err(|e| png_err(path, e))
}

/// Load an RGBA PNG as separate RGB color and single-channel alpha images.
pub fn load_rgba_png(path: impl AsRef<Path>) -> Result<(Image, Image)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.color_type != png::ColorType::Rgba {
        return Err(ImageError::UnsupportedFormat(format!(
            "{}: expected RGBA png, found {:?}",
            path.display(),
            info.color_type
        )));
    }
    let samples = decode_samples(&buf[..info.buffer_size()], info.bit_depth, path)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let mut rgb = Vec::with_capacity(h * w * 3);
    let mut alpha = Vec::with_capacity(h * w);
    for px in samples.chunks_exact(4) {
        rgb.extend_from_slice(&px[..3]);
        alpha.push(px[3]);
    }
    Ok((
        Image::from_vec(h, w, 3, rgb)?,
        Image::from_vec(h, w, 1, alpha)?,
    ))
}

// ---------------------------------------------------------------------------
// PNM (binary PPM P6 / PGM P5)
// ---------------------------------------------------------------------------

struct PnmHeader {
    magic: u8,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8], path: &Path) -> Result<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' || (bytes[1] != b'5' && bytes[1] != b'6') {
        return Err(malformed("pnm", path, "missing P5/P6 magic"));
    }
    let magic = bytes[1];
    let mut pos = 2usize;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("pnm", path, "truncated header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| malformed("pnm", path, "bad header number"))?;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed("pnm", path, "missing delimiter after maxval"));
    }
    pos += 1;
    let maxval = fields[2];
    if maxval == 0 || maxval > 65535 {
        return Err(malformed("pnm", path, format!("bad maxval {maxval}")));
    }
    Ok(PnmHeader {
        magic,
        width: fields[0] as usize,
        height: fields[1] as usize,
        maxval,
        data_start: pos,
    })
}

fn load_pnm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let hdr = parse_pnm_header(&bytes, path)?;
    let channels = if hdr.magic == b'6' { 3 } else { 1 };
    let n = hdr.width * hdr.height * channels;
    let wide = hdr.maxval > 255;
    let need = n * if wide { 2 } else { 1 };
    let payload = &bytes[hdr.data_start..];
    if payload.len() < need {
        return Err(malformed(
            "pnm",
            path,
            format!("truncated payload: {} of {need} bytes", payload.len()),
        ));
    }
    let scale = 1.0 / hdr.maxval as f32;
    let data: Vec<f32> = if wide {
        payload[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 * scale)
            .collect()
    } else {
        payload[..need].iter().map(|&b| b as f32 * scale).collect()
    };
    Image::from_vec(hdr.height, hdr.width, channels, data)
}

fn save_pnm(img: &Image, path: &Path, depth: u8, magic: u8) -> Result<()> {
    let maxval: u32 = if depth == 8 { 255 } else { 65535 };
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    write!(out, "P{} {} {} {}\n", magic - b'0', img.width(), img.height(), maxval)
        .map_err(|e| io_err(path, e))?;
    if depth == 8 {
        let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v, 255) as u8).collect();
        out.write_all(&bytes).map_err(|e| io_err(path, e))?;
    } else {
        let mut bytes = Vec::with_capacity(img.data().len() * 2);
        for &v in img.data() {
            bytes.extend_from_slice(&(quantize(v, 65535) as u16).to_be_bytes());
        }
        out.write_all(&bytes).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Masks, confidence maps, disparity
// ---------------------------------------------------------------------------

/// Save a confidence map as an 8-bit PGM scaled to the file bit depth.
pub fn save_confidence_pgm(map: &ConfidenceMap, path: impl AsRef<Path>) -> Result<()> {
    let img = Image::from_vec(map.height(), map.width(), 1, map.values().to_vec())?;
    save_with_depth(&img, path.as_ref(), 8)
}

/// Load an 8- or 16-bit PGM into a confidence map.
pub fn load_confidence_pgm(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    let img = load_pnm(path.as_ref())?;
    if img.channels() != 1 {
        return Err(ImageError::InvalidChannels(img.channels()));
    }
    ConfidenceMap::from_vec(img.height(), img.width(), img.data().to_vec())
}

/// Save a binary mask as a 0/255 PGM.
pub fn save_mask_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let img = Image::from_vec(
        mask.height(),
        mask.width(),
        1,
        mask.values().iter().map(|&v| v as f32).collect(),
    )?;
    save_with_depth(&img, path.as_ref(), 8)
}

/// Load a mask PGM; values above half the file's dynamic range become 1.
pub fn load_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = load_pnm(path.as_ref())?;
    if img.channels() != 1 {
        return Err(ImageError::InvalidChannels(img.channels()));
    }
    BinaryMask::from_vec(
        img.height(),
        img.width(),
        img.data().iter().map(|&v| (v > 0.5) as u8).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_rgb() -> Image {
        Image::from_fn(5, 7, 3, |y, x, c| ((y * 19 + x * 5 + c * 2) % 17) as f32 / 16.0).unwrap()
    }

    #[test]
    fn png_roundtrip_8bit_rgb() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = sample_rgb();
        // snap to the 8-bit lattice so the roundtrip is exact
        let img8 = Image::from_fn(5, 7, 3, |y, x, c| {
            (img.get(y, x, c) * 255.0).round() / 255.0
        })
        .unwrap();
        save_image(&img8, &p).unwrap();
        let back = load_image(&p).unwrap();
        for (a, b) in img8.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 0.5 / 255.0);
        }
    }

    #[test]
    fn png_roundtrip_16bit_gray_and_linear_mapping() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("g16.png");
        let img = Image::from_vec(1, 3, 1, vec![0.0, 32768.0 / 65535.0, 1.0]).unwrap();
        save_image_16(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.data(), img.data());
        assert!((back.get(0, 1, 0) - 32768.0 / 65535.0).abs() < 1e-9);
    }

    #[test]
    fn ppm_single_white_pixel_by_format_definition() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("w.ppm");
        std::fs::write(&p, b"P6 1 1 255\n\xff\xff\xff").unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (1, 1, 3));
        assert_eq!(img.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn ppm_roundtrip_16bit() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.ppm");
        let img = Image::from_fn(3, 4, 3, |y, x, c| {
            ((y * 4 + x) * 3 + c) as f32 * 1000.0 / 65535.0
        })
        .unwrap();
        save_image_16(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 0.5 / 65535.0);
        }
    }

    #[test]
    fn pnm_truncated_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("t.ppm");
        std::fs::write(&p, b"P6 2 2 255\n\xff\xff").unwrap();
        assert!(matches!(
            load_image(&p),
            Err(ImageError::Malformed { .. })
        ));
    }

    #[test]
    fn unknown_extension_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.bmp");
        assert!(matches!(
            load_image(&p),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn mask_pgm_roundtrip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let mut m = BinaryMask::zeros(4, 6);
        m.set(1, 2, true);
        m.set(3, 5, true);
        save_mask_pgm(&m, &p).unwrap();
        assert_eq!(load_mask_pgm(&p).unwrap(), m);
    }

    #[test]
    fn rgba_roundtrip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("plane.png");
        let color = Image::from_fn(4, 5, 3, |y, x, c| {
            ((y * 5 + x + c) % 4) as f32 / 4.0
        })
        .unwrap();
        let alpha = Image::from_fn(4, 5, 1, |y, x, _| ((y + x) % 3) as f32 / 2.0).unwrap();
        save_rgba_png(&color, &alpha, &p, 16).unwrap();
        let (c2, a2) = load_rgba_png(&p).unwrap();
        for (a, b) in color.data().iter().zip(c2.data()) {
            assert!((a - b).abs() < 1.0 / 65535.0);
        }
        for (a, b) in alpha.data().iter().zip(a2.data()) {
            assert!((a - b).abs() < 1.0 / 65535.0);
        }
    }
}
