//! Multiplane-image 3D reconstruction and novel-view rendering.
//!
//! A stereo pair (real or pseudo) is swept over a set of fronto-parallel
//! depth planes into a `[6, H, W, D]` plane-sweep volume; per-pixel
//! photoconsistency across the sweep yields a `[4, H, W, D]` RGB-alpha
//! multiplane image, which renders novel views by warping each plane with a
//! planar homography and compositing back to front.

mod estimate;
mod geometry;
mod io;
mod pipeline;
mod render;
mod volume;

pub use estimate::{estimate_mpi, Mpi, MpiPlane};
pub use geometry::{CameraPose, CameraRig, Mat3};
pub use io::{load_mpi, save_mpi};
pub use pipeline::{reconstruct_and_render, Reconstruction, RightSource};
pub use render::render_view;
pub use volume::{build_psv, plane_depths, PlaneSweepVolume};

use thiserror::Error;

/// Errors for camera geometry, volume construction, and rendering.
#[derive(Debug, Error)]
pub enum MpiError {
    #[error("degenerate rig: fx={fx}, fy={fy} must be positive")]
    DegenerateRig { fx: f64, fy: f64 },
    #[error("baseline {0} must be non-negative")]
    NegativeBaseline(f64),
    #[error("rotation is not orthonormal (max deviation {error})")]
    InvalidRotation { error: f64 },
    #[error("invalid depth range: need 0 < near ({near}) < far ({far})")]
    InvalidDepthRange { near: f64, far: f64 },
    #[error("need at least 2 planes, got {0}")]
    TooFewPlanes(usize),
    #[error("plane depths must be strictly positive and ordered far to near")]
    UnorderedDepths,
    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("plane-sweep inputs must be 3-channel, got {0}")]
    NotRgb(usize),
    #[error("degenerate homography for plane {index} at depth {depth}")]
    DegenerateHomography { index: usize, depth: f64 },
    #[error("plane count {got} does not match volume depth {expected}")]
    PlaneCountMismatch { got: usize, expected: usize },
    #[error("image error: {0}")]
    Image(#[from] crate::imagecore::ImageError),
    #[error("stereo synthesis error: {0}")]
    Synth(#[from] crate::stereosynth::SynthError),
    #[error("malformed mpi manifest {path}: {detail}")]
    MalformedManifest { path: String, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MpiError>;
