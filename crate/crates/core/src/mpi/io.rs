//! On-disk MPI layout: a plain-text manifest (plane count, depths,
//! intrinsics) plus one RGBA PNG per plane, `plane_000.png` (far) through
//! `plane_<D-1>.png` (near).

use std::fmt::Write as _;
use std::path::Path;

use crate::imagecore::{load_rgba_png, save_rgba_png};

use super::estimate::{Mpi, MpiPlane};
use super::geometry::CameraRig;
use super::{MpiError, Result};

fn io_err(path: &Path, source: std::io::Error) -> MpiError {
    MpiError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn manifest_err(path: &Path, detail: impl Into<String>) -> MpiError {
    MpiError::MalformedManifest {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Write the MPI into `dir` (created if absent).
pub fn save_mpi(mpi: &Mpi, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = String::new();
    let rig = mpi.rig();
    writeln!(manifest, "planes = {}", mpi.planes().len()).unwrap();
    writeln!(manifest, "fx = {}", rig.fx).unwrap();
    writeln!(manifest, "fy = {}", rig.fy).unwrap();
    writeln!(manifest, "cx = {}", rig.cx).unwrap();
    writeln!(manifest, "cy = {}", rig.cy).unwrap();
    writeln!(manifest, "baseline = {}", rig.baseline).unwrap();
    let depths = mpi
        .depths()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(manifest, "depths = {depths}").unwrap();
    let mpath = dir.join("mpi.txt");
    std::fs::write(&mpath, manifest).map_err(|e| io_err(&mpath, e))?;
    for (i, plane) in mpi.planes().iter().enumerate() {
        let ppath = dir.join(format!("plane_{i:03}.png"));
        save_rgba_png(&plane.color, &plane.alpha, &ppath, 16)?;
    }
    Ok(())
}

/// Load an MPI previously written by [`save_mpi`].
pub fn load_mpi(dir: impl AsRef<Path>) -> Result<Mpi> {
    let dir = dir.as_ref();
    let mpath = dir.join("mpi.txt");
    let text = std::fs::read_to_string(&mpath).map_err(|e| io_err(&mpath, e))?;
    let mut planes_n: Option<usize> = None;
    let mut fx = None;
    let mut fy = None;
    let mut cx = None;
    let mut cy = None;
    let mut baseline = None;
    let mut depths: Option<Vec<f64>> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| manifest_err(&mpath, format!("bad line {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_f = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| manifest_err(&mpath, format!("bad number {v:?} for {key}")))
        };
        match key {
            "planes" => {
                planes_n = Some(
                    value
                        .parse()
                        .map_err(|_| manifest_err(&mpath, "bad plane count"))?,
                )
            }
            "fx" => fx = Some(parse_f(value)?),
            "fy" => fy = Some(parse_f(value)?),
            "cx" => cx = Some(parse_f(value)?),
            "cy" => cy = Some(parse_f(value)?),
            "baseline" => baseline = Some(parse_f(value)?),
            "depths" => {
                depths = Some(
                    value
                        .split_whitespace()
                        .map(|v| parse_f(v))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            other => return Err(manifest_err(&mpath, format!("unknown key {other:?}"))),
        }
    }
    let planes_n = planes_n.ok_or_else(|| manifest_err(&mpath, "missing planes"))?;
    let depths = depths.ok_or_else(|| manifest_err(&mpath, "missing depths"))?;
    if depths.len() != planes_n {
        return Err(manifest_err(&mpath, "depth count != plane count"));
    }
    let rig = CameraRig::new(
        fx.ok_or_else(|| manifest_err(&mpath, "missing fx"))?,
        fy.ok_or_else(|| manifest_err(&mpath, "missing fy"))?,
        cx.ok_or_else(|| manifest_err(&mpath, "missing cx"))?,
        cy.ok_or_else(|| manifest_err(&mpath, "missing cy"))?,
        baseline.ok_or_else(|| manifest_err(&mpath, "missing baseline"))?,
    )?;
    let mut planes = Vec::with_capacity(planes_n);
    for i in 0..planes_n {
        let ppath = dir.join(format!("plane_{i:03}.png"));
        let (color, alpha) = load_rgba_png(&ppath)?;
        planes.push(MpiPlane { color, alpha });
    }
    Mpi::new(planes, depths, rig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Image;
    use tempfile::tempdir;

    #[test]
    fn mpi_roundtrip_preserves_structure() {
        let rig = CameraRig::new(120.0, 120.0, 15.5, 7.5, 1.0).unwrap();
        let planes = (0..3)
            .map(|i| MpiPlane {
                color: Image::from_fn(6, 9, 3, |y, x, c| ((y + x + c + i) % 5) as f32 / 4.0)
                    .unwrap(),
                alpha: Image::from_fn(6, 9, 1, |y, x, _| ((y * x + i) % 3) as f32 / 2.0).unwrap(),
            })
            .collect::<Vec<_>>();
        let mpi = Mpi::new(planes, vec![60.0, 30.0, 15.0], rig).unwrap();
        let dir = tempdir().unwrap();
        save_mpi(&mpi, dir.path()).unwrap();
        let back = load_mpi(dir.path()).unwrap();
        assert_eq!(back.shape(), mpi.shape());
        assert_eq!(back.depths(), mpi.depths());
        assert_eq!(back.rig(), mpi.rig());
        for (a, b) in mpi.planes().iter().zip(back.planes()) {
            for (x, y) in a.color.data().iter().zip(b.color.data()) {
                assert!((x - y).abs() < 1.0 / 65535.0);
            }
            for (x, y) in a.alpha.data().iter().zip(b.alpha.data()) {
                assert!((x - y).abs() < 1.0 / 65535.0);
            }
        }
    }
}
