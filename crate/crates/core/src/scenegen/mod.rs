//! Procedural stereo scenes with closed-form ground truth.
//!
//! Scenes are stacks of textured fronto-parallel rectangles rendered by a
//! per-pixel painter's algorithm. Because every layer is fronto-parallel and
//! textures are exact functions of world coordinates, disparity is piecewise
//! constant and ground-truth disparity, occlusion, and novel views all come
//! from closed-form geometry instead of image matching.
//!
//! Layer depths are chosen so disparities under the default rig are exact
//! small integers, which makes "warp left by ground-truth disparity equals
//! right" hold to within floating-point roundoff on non-occluded pixels.

mod corpus;
mod texture;

pub use corpus::{read_sample, write_sample, CORPUS_CAMERAS_FILE};
pub use texture::{BasePattern, LayerTexture};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imagecore::{BinaryMask, FlowField, Image};
use crate::mpi::{CameraPose, CameraRig};

/// Errors from scene generation and analytic rendering.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene has no layers")]
    EmptyScene,
    #[error("layer {index} has non-positive depth {depth}")]
    BadDepth { index: usize, depth: f64 },
    #[error("layers must be ordered far to near (layer {index})")]
    UnorderedLayers { index: usize },
    #[error("analytic rendering supports translation-only poses")]
    RotationUnsupported,
    #[error("pose puts layer {index} behind the camera (depth {depth})")]
    LayerBehindCamera { index: usize, depth: f64 },
    #[error(
        "layer {index} leaves the frustum: pixel ({x}, {y}) of the target view is uncovered"
    )]
    FrustumExit { index: usize, x: usize, y: usize },
    #[error("camera error: {0}")]
    Camera(#[from] crate::mpi::MpiError),
    #[error("image error: {0}")]
    Image(#[from] crate::imagecore::ImageError),
    #[error("malformed {kind} file {path}: {detail}")]
    Malformed {
        kind: &'static str,
        path: String,
        detail: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SceneError>;

/// Scene difficulty buckets offered by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Difficulty {
    /// A single background plane (zero-variance disparity).
    Flat,
    /// Background plus a handful of rectangles at distinct depths.
    Layered,
    /// Additionally contains vertical bars 1-3 px wide at near depths.
    ThinStructures,
}

impl Difficulty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Flat => "flat",
            Difficulty::Layered => "layered",
            Difficulty::ThinStructures => "thin-structures",
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "flat" => Ok(Difficulty::Flat),
            "layered" => Ok(Difficulty::Layered),
            "thin-structures" | "thin" => Ok(Difficulty::ThinStructures),
            other => Err(format!("unknown difficulty {other:?}")),
        }
    }
}

/// One textured fronto-parallel rectangle at a fixed depth.
/// Bounds are world units at that depth, half-open in both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub depth: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub texture: LayerTexture,
}

impl Layer {
    fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x0 && u < self.x1 && v >= self.y0 && v < self.y1
    }

    /// On-screen width in the reference view, in pixels.
    pub fn screen_width(&self, rig: &CameraRig) -> f64 {
        (self.x1 - self.x0) * rig.fx / self.depth
    }
}

/// Layers ordered far to near; index 0 is the background plane, which must
/// cover every pixel of every rendered view.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredScene {
    layers: Vec<Layer>,
}

impl LayeredScene {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(SceneError::EmptyScene);
        }
        for (i, l) in layers.iter().enumerate() {
            if !(l.depth > 0.0) {
                return Err(SceneError::BadDepth {
                    index: i,
                    depth: l.depth,
                });
            }
            if i > 0 && layers[i - 1].depth <= l.depth {
                return Err(SceneError::UnorderedLayers { index: i });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Indices of layers thinner than or equal to `max_px` on screen.
    pub fn thin_layer_indices(&self, rig: &CameraRig, max_px: f64) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .skip(1) // background never counts
            .filter(|(_, l)| l.screen_width(rig) <= max_px)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A rendered stereo pair with exact ground truth.
#[derive(Debug, Clone)]
pub struct StereoSample {
    pub left: Image,
    pub right: Image,
    /// Disparity on the right-view grid: warping the left image by this
    /// field reproduces the right view away from occlusions.
    pub gt_disparity: FlowField,
    /// Right-view pixels with no left-view correspondence.
    pub gt_occlusion: BinaryMask,
    /// Disparity on the left-view grid (its negation is the exact
    /// right-to-left backward flow).
    pub gt_disparity_left: FlowField,
    pub camera: CameraRig,
    pub novel_views: Vec<(CameraPose, Image)>,
}

/// Desk-scale defaults: 256x96, fx chosen so the generator's integer
/// disparities correspond to exactly representable depths.
pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_HEIGHT: usize = 96;
pub const DEFAULT_FOCAL: f64 = 120.0;
pub const DEFAULT_BASELINE: f64 = 1.0;

/// Generation parameters; the defaults match the corpus format used across
/// the test suites.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub width: usize,
    pub height: usize,
    pub rig: CameraRig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            rig: default_rig(DEFAULT_WIDTH, DEFAULT_HEIGHT),
        }
    }
}

/// Principal point at the image center, focal/baseline at the defaults.
pub fn default_rig(width: usize, height: usize) -> CameraRig {
    CameraRig::new(
        DEFAULT_FOCAL,
        DEFAULT_FOCAL,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        DEFAULT_BASELINE,
    )
    .expect("default rig is valid")
}

/// Integer disparities whose depths (fx*baseline/d) are exact under the
/// default rig; the generator draws from these.
const BACKGROUND_DISPARITIES: [i64; 2] = [1, 2];
const MID_DISPARITIES: [i64; 4] = [3, 4, 5, 6];
const NEAR_DISPARITIES: [i64; 3] = [8, 10, 12];

fn random_color(rng: &mut ChaCha8Rng) -> [f32; 3] {
    [
        rng.gen_range(0.15..0.9),
        rng.gen_range(0.15..0.9),
        rng.gen_range(0.15..0.9),
    ]
}

fn random_texture(rng: &mut ChaCha8Rng, allow_ramp: bool) -> LayerTexture {
    let kind = rng.gen_range(0..if allow_ramp { 3 } else { 2 });
    let base = match kind {
        0 => BasePattern::Flat {
            color: random_color(rng),
        },
        1 => BasePattern::Checker {
            cell: rng.gen_range(1.2..3.0),
            color_a: random_color(rng),
            color_b: random_color(rng),
        },
        _ => BasePattern::Ramp {
            color_a: random_color(rng),
            color_b: random_color(rng),
        },
    };
    LayerTexture {
        base,
        noise_seed: rng.gen(),
        noise_amp: rng.gen_range(0.1..0.2),
    }
}

/// World-space bounds of a screen rectangle at the given depth.
fn screen_rect_to_world(
    rig: &CameraRig,
    depth: f64,
    x0_px: f64,
    y0_px: f64,
    x1_px: f64,
    y1_px: f64,
) -> (f64, f64, f64, f64) {
    (
        (x0_px - rig.cx) * depth / rig.fx,
        (y0_px - rig.cy) * depth / rig.fy,
        (x1_px - rig.cx) * depth / rig.fx,
        (y1_px - rig.cy) * depth / rig.fy,
    )
}

/// Margin (pixels) by which the background extends past the reference view,
/// sized for lateral moves of a couple of baselines plus small zooms.
const BACKGROUND_MARGIN_PX: f64 = 48.0;

fn background_layer(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Layer {
    let disp = *BACKGROUND_DISPARITIES.choose(rng).unwrap();
    let depth = cfg.rig.depth_for_disparity(disp as f64);
    let (x0, y0, x1, y1) = screen_rect_to_world(
        &cfg.rig,
        depth,
        -BACKGROUND_MARGIN_PX,
        -BACKGROUND_MARGIN_PX,
        cfg.width as f64 + BACKGROUND_MARGIN_PX,
        cfg.height as f64 + BACKGROUND_MARGIN_PX,
    );
    Layer {
        depth,
        x0,
        y0,
        x1,
        y1,
        texture: random_texture(rng, true),
    }
}

fn rect_layer(
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    disparity: i64,
    width_px: f64,
    height_px: f64,
) -> Layer {
    let depth = cfg.rig.depth_for_disparity(disparity as f64);
    let margin = 16.0;
    let x0_px = rng.gen_range(margin..(cfg.width as f64 - margin - width_px));
    let y0_px = rng.gen_range(4.0..(cfg.height as f64 - 4.0 - height_px));
    let (x0, y0, x1, y1) = screen_rect_to_world(
        &cfg.rig,
        depth,
        x0_px,
        y0_px,
        x0_px + width_px,
        y0_px + height_px,
    );
    Layer {
        depth,
        x0,
        y0,
        x1,
        y1,
        texture: random_texture(rng, false),
    }
}

/// Deterministically generate a scene for (seed, difficulty) at the default
/// desk-scale configuration.
pub fn generate_scene(seed: u64, difficulty: Difficulty) -> LayeredScene {
    generate_scene_with(&GeneratorConfig::default(), seed, difficulty)
}

/// Deterministically generate a scene under an explicit configuration.
pub fn generate_scene_with(
    cfg: &GeneratorConfig,
    seed: u64,
    difficulty: Difficulty,
) -> LayeredScene {
    let salt = match difficulty {
        Difficulty::Flat => 0x0Fu64,
        Difficulty::Layered => 0x1A,
        Difficulty::ThinStructures => 0x73,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E3779B97F4A7C15) ^ salt);
    let mut layers = vec![background_layer(cfg, &mut rng)];

    match difficulty {
        Difficulty::Flat => {}
        Difficulty::Layered => {
            let n = rng.gen_range(3..=5);
            let mut disps = MID_DISPARITIES.to_vec();
            disps.extend_from_slice(&NEAR_DISPARITIES[..2]);
            disps.shuffle(&mut rng);
            let mut chosen: Vec<i64> = disps.into_iter().take(n).collect();
            chosen.sort_unstable(); // far to near
            for d in chosen {
                let w = rng.gen_range(30.0..80.0);
                let h = rng.gen_range(24.0..60.0);
                layers.push(rect_layer(cfg, &mut rng, d, w, h));
            }
        }
        Difficulty::ThinStructures => {
            let mut mids = MID_DISPARITIES.to_vec();
            mids.shuffle(&mut rng);
            let mut chosen: Vec<(i64, bool)> =
                mids.into_iter().take(2).map(|d| (d, false)).collect();
            let n_bars = rng.gen_range(2..=4);
            let mut nears = NEAR_DISPARITIES.to_vec();
            nears.shuffle(&mut rng);
            for i in 0..n_bars {
                chosen.push((nears[i % nears.len()], true));
            }
            chosen.sort_unstable_by_key(|(d, _)| *d);
            chosen.dedup_by_key(|(d, thin)| (*d, *thin));
            for (d, thin) in chosen {
                if thin {
                    let w = rng.gen_range(1.0f64..3.0).round().max(1.0);
                    let h = rng.gen_range(40.0..90.0);
                    layers.push(rect_layer(cfg, &mut rng, d, w, h));
                } else {
                    let w = rng.gen_range(30.0..70.0);
                    let h = rng.gen_range(24.0..56.0);
                    layers.push(rect_layer(cfg, &mut rng, d, w, h));
                }
            }
        }
    }
    // Strict far-to-near ordering with distinct depths is guaranteed by the
    // distinct integer disparities.
    LayeredScene::new(layers).expect("generated scenes are well-formed")
}

/// Nearest layer hit by the target-view ray through pixel (x, y), plus the
/// world point on it. Translation-only poses.
fn raycast(
    scene: &LayeredScene,
    rig: &CameraRig,
    t: [f64; 3],
    x: f64,
    y: f64,
) -> Result<Option<(usize, f64, f64)>> {
    for (index, layer) in scene.layers.iter().enumerate().rev() {
        let z_t = layer.depth + t[2];
        if z_t <= 0.0 {
            return Err(SceneError::LayerBehindCamera {
                index,
                depth: z_t,
            });
        }
        let u = (x - rig.cx) * z_t / rig.fx - t[0];
        let v = (y - rig.cy) * z_t / rig.fy - t[1];
        if layer.contains(u, v) {
            return Ok(Some((index, u, v)));
        }
    }
    Ok(None)
}

/// Analytic painter's-algorithm render of the scene from a translated pose.
pub fn render_view(
    scene: &LayeredScene,
    rig: &CameraRig,
    pose: &CameraPose,
    width: usize,
    height: usize,
) -> Result<Image> {
    if !pose.is_identity_rotation() {
        return Err(SceneError::RotationUnsupported);
    }
    let t = pose.translation_vec();
    let mut img = Image::new(height, width, 3)?;
    for y in 0..height {
        for x in 0..width {
            match raycast(scene, rig, t, x as f64, y as f64)? {
                Some((idx, u, v)) => {
                    let layer = &scene.layers[idx];
                    let rgb = layer
                        .texture
                        .eval(u, v, (layer.x0, layer.y0, layer.x1, layer.y1));
                    for (c, val) in rgb.iter().enumerate() {
                        img.set(y, x, c, *val);
                    }
                }
                None => {
                    return Err(SceneError::FrustumExit { index: 0, x, y });
                }
            }
        }
    }
    Ok(img)
}

/// Per-pixel index of the visible layer from a translated pose.
pub fn layer_id_map(
    scene: &LayeredScene,
    rig: &CameraRig,
    pose: &CameraPose,
    width: usize,
    height: usize,
) -> Result<Vec<usize>> {
    if !pose.is_identity_rotation() {
        return Err(SceneError::RotationUnsupported);
    }
    let t = pose.translation_vec();
    let mut ids = vec![0usize; width * height];
    for y in 0..height {
        for x in 0..width {
            ids[y * width + x] = match raycast(scene, rig, t, x as f64, y as f64)? {
                Some((idx, _, _)) => idx,
                None => return Err(SceneError::FrustumExit { index: 0, x, y }),
            };
        }
    }
    Ok(ids)
}

/// Render a rectified stereo pair with analytic disparity and occlusion.
/// `novel_views` is left empty; callers add views via [`render_view`].
pub fn render_stereo(
    scene: &LayeredScene,
    rig: &CameraRig,
    width: usize,
    height: usize,
) -> Result<StereoSample> {
    let left_pose = CameraPose::identity();
    let right_pose = CameraPose::right_of_rig(rig);
    let left = render_view(scene, rig, &left_pose, width, height)?;
    let right = render_view(scene, rig, &right_pose, width, height)?;

    let tr = right_pose.translation_vec();
    let mut gt_disparity = FlowField::new(height, width);
    let mut gt_occlusion = BinaryMask::zeros(height, width);
    let mut gt_disparity_left = FlowField::new(height, width);

    for y in 0..height {
        for x in 0..width {
            // left-view disparity
            let (l_idx, _, _) = raycast(scene, rig, [0.0; 3], x as f64, y as f64)?
                .ok_or(SceneError::FrustumExit { index: 0, x, y })?;
            gt_disparity_left.set(y, x, rig.disparity(scene.layers[l_idx].depth) as f32);

            // right-view disparity and occlusion
            let (r_idx, u, v) = raycast(scene, rig, tr, x as f64, y as f64)?
                .ok_or(SceneError::FrustumExit { index: 0, x, y })?;
            let layer = &scene.layers[r_idx];
            let disp = rig.disparity(layer.depth);
            gt_disparity.set(y, x, disp as f32);

            // Project the world point into the left view and check the same
            // layer is the nearest hit there.
            let x_left = rig.fx * u / layer.depth + rig.cx;
            let y_left = rig.fy * v / layer.depth + rig.cy;
            let occluded = if x_left < 0.0 || x_left > (width - 1) as f64 {
                true // out of the left frame: no correspondence
            } else {
                match raycast(scene, rig, [0.0; 3], x_left, y_left)? {
                    Some((idx, _, _)) => idx != r_idx,
                    None => true,
                }
            };
            gt_occlusion.set(y, x, occluded);
        }
    }

    Ok(StereoSample {
        left,
        right,
        gt_disparity,
        gt_occlusion,
        gt_disparity_left,
        camera: *rig,
        novel_views: Vec::new(),
    })
}

/// Default lateral novel-view poses used by the corpus generator
/// (fractions of the baseline; cameras move along the stereo axis).
pub fn default_novel_poses(rig: &CameraRig) -> Vec<CameraPose> {
    [0.5, -0.5, 1.5]
        .iter()
        .map(|f| CameraPose::translation(-f * rig.baseline, 0.0, 0.0))
        .collect()
}

/// Render a full sample: stereo pair, ground truth, and novel views.
pub fn render_sample(
    scene: &LayeredScene,
    rig: &CameraRig,
    width: usize,
    height: usize,
    novel_poses: &[CameraPose],
) -> Result<StereoSample> {
    let mut sample = render_stereo(scene, rig, width, height)?;
    for pose in novel_poses {
        let img = render_view(scene, rig, pose, width, height)?;
        sample.novel_views.push((pose.clone(), img));
    }
    Ok(sample)
}
