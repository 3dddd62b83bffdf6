//! Procedural textures evaluated exactly at arbitrary world coordinates.
//!
//! Every texture is a pure function of (u, v) in scene units, so two camera
//! views sampling the same surface point fetch the same value — which is
//! what makes the stereo ground truth exact. A smooth multi-octave value
//! noise rides on every base pattern so photoconsistency matching stays
//! well-posed on otherwise flat regions; the octave cells are fixed in
//! world units, which makes on-screen texture scale a depth cue.

/// Base pattern of a layer.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePattern {
    /// Uniform color.
    Flat { color: [f32; 3] },
    /// Axis-aligned checkerboard with the given world-unit cell size.
    Checker {
        cell: f64,
        color_a: [f32; 3],
        color_b: [f32; 3],
    },
    /// Horizontal gradient between two colors across the layer bounds.
    Ramp { color_a: [f32; 3], color_b: [f32; 3] },
}

/// A layer's texture: base pattern plus seeded value-noise overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTexture {
    pub base: BasePattern,
    pub noise_seed: u64,
    /// Peak-to-peak amplitude of the noise overlay.
    pub noise_amp: f32,
}

/// SplitMix64-style integer hash of a lattice point, mapped into [0, 1).
fn lattice_hash(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut z = seed
        .wrapping_add((ix as u64).wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add((iy as u64).wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear value noise on a lattice with the given world cell size.
fn value_noise(u: f64, v: f64, cell: f64, seed: u64) -> f64 {
    let x = u / cell;
    let y = v / cell;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (ix, iy) = (x0 as i64, y0 as i64);
    let n00 = lattice_hash(ix, iy, seed);
    let n10 = lattice_hash(ix + 1, iy, seed);
    let n01 = lattice_hash(ix, iy + 1, seed);
    let n11 = lattice_hash(ix + 1, iy + 1, seed);
    let top = n00 + fx * (n10 - n00);
    let bot = n01 + fx * (n11 - n01);
    top + fy * (bot - top)
}

/// Octaves with fixed world-unit scales (coarse to fine) and their weights.
const NOISE_OCTAVES: [(f64, f64); 3] = [(4.0, 0.5), (1.0, 0.3), (0.3, 0.2)];

fn overlay(u: f64, v: f64, seed: u64) -> f64 {
    let mut acc = 0.0;
    for (i, (cell, weight)) in NOISE_OCTAVES.iter().enumerate() {
        acc += weight * value_noise(u, v, *cell, seed.wrapping_add(i as u64 * 0x51ED2701));
    }
    acc - 0.5
}

impl LayerTexture {
    /// Evaluate at world point (u, v); `bounds = (x0, y0, x1, y1)` of the
    /// owning layer in world units (the ramp spans them).
    pub fn eval(&self, u: f64, v: f64, bounds: (f64, f64, f64, f64)) -> [f32; 3] {
        let base = match &self.base {
            BasePattern::Flat { color } => *color,
            BasePattern::Checker {
                cell,
                color_a,
                color_b,
            } => {
                let parity =
                    ((u / cell).floor() as i64 + (v / cell).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    *color_a
                } else {
                    *color_b
                }
            }
            BasePattern::Ramp { color_a, color_b } => {
                let (x0, _, x1, _) = bounds;
                let t = ((u - x0) / (x1 - x0)).clamp(0.0, 1.0) as f32;
                [
                    color_a[0] + t * (color_b[0] - color_a[0]),
                    color_a[1] + t * (color_b[1] - color_a[1]),
                    color_a[2] + t * (color_b[2] - color_a[2]),
                ]
            }
        };
        let n = overlay(u, v, self.noise_seed) as f32 * self.noise_amp;
        [
            (base[0] + n).clamp(0.0, 1.0),
            (base[1] + n).clamp(0.0, 1.0),
            (base[2] + n).clamp(0.0, 1.0),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_deterministic() {
        let t = LayerTexture {
            base: BasePattern::Checker {
                cell: 2.0,
                color_a: [0.9, 0.1, 0.1],
                color_b: [0.1, 0.1, 0.9],
            },
            noise_seed: 77,
            noise_amp: 0.15,
        };
        let b = (0.0, 0.0, 10.0, 10.0);
        for (u, v) in [(0.3, 0.7), (5.21, 3.17), (-2.5, 9.9)] {
            assert_eq!(t.eval(u, v, b), t.eval(u, v, b));
        }
    }

    #[test]
    fn noise_overlay_varies_spatially() {
        let t = LayerTexture {
            base: BasePattern::Flat {
                color: [0.5, 0.5, 0.5],
            },
            noise_seed: 3,
            noise_amp: 0.2,
        };
        let b = (0.0, 0.0, 8.0, 8.0);
        let a = t.eval(0.1, 0.1, b);
        let c = t.eval(4.4, 2.9, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ramp_spans_bounds() {
        let t = LayerTexture {
            base: BasePattern::Ramp {
                color_a: [0.0, 0.0, 0.0],
                color_b: [1.0, 1.0, 1.0],
            },
            noise_seed: 0,
            noise_amp: 0.0,
        };
        let b = (0.0, 0.0, 10.0, 5.0);
        assert_eq!(t.eval(0.0, 1.0, b), [0.0, 0.0, 0.0]);
        assert_eq!(t.eval(10.0, 1.0, b), [1.0, 1.0, 1.0]);
        assert_eq!(t.eval(5.0, 1.0, b), [0.5, 0.5, 0.5]);
    }
}
