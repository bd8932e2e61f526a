//! Expectation over transformation: a random rotate, scale, blur and brightness
//! change applied to the patch before it is rendered.
//!
//! Everything before the final clamp is linear in the pixels, so each sampled
//! transform is kept as explicit weights and the gradient runs through its adjoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::patch::{Patch, CHANNELS};
use crate::error::{Error, Result};

/// Closed sampling ranges, `[lo, hi]` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EotParams {
    pub rotation_deg: [f64; 2],
    pub brightness: [f64; 2],
    pub blur_radius: [f64; 2],
    pub scale: [f64; 2],
}

impl Default for EotParams {
    fn default() -> Self {
        Self {
            rotation_deg: [-10.0, 10.0],
            brightness: [0.8, 1.2],
            blur_radius: [0.0, 1.0],
            scale: [0.9, 1.1],
        }
    }
}

impl EotParams {
    pub fn identity() -> Self {
        Self {
            rotation_deg: [0.0, 0.0],
            brightness: [1.0, 1.0],
            blur_radius: [0.0, 0.0],
            scale: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, r: [f64; 2], min: f64| {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::InvalidConfig(format!(
                    "{name} range must satisfy lo <= hi (got {r:?})"
                )));
            }
            if r[0] < min {
                return Err(Error::InvalidConfig(format!(
                    "{name} range must start at or above {min} (got {r:?})"
                )));
            }
            Ok(())
        };
        check("rotation_deg", self.rotation_deg, f64::NEG_INFINITY)?;
        check("brightness", self.brightness, 0.0)?;
        check("blur_radius", self.blur_radius, 0.0)?;
        check("scale", self.scale, f64::MIN_POSITIVE)?;
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> EotSample {
        let pick = |r: [f64; 2], rng: &mut dyn rand::RngCore| {
            if r[0] == r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..=r[1])
            }
        };
        EotSample {
            rotation_deg: pick(self.rotation_deg, rng),
            scale: pick(self.scale, rng),
            blur_radius: pick(self.blur_radius, rng),
            brightness: pick(self.brightness, rng),
        }
    }
}

/// One drawn transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EotSample {
    pub rotation_deg: f64,
    pub scale: f64,
    pub blur_radius: f64,
    pub brightness: f64,
}

impl EotSample {
    pub const IDENTITY: EotSample = EotSample {
        rotation_deg: 0.0,
        scale: 1.0,
        blur_radius: 0.0,
        brightness: 1.0,
    };
}

/// A sampled transform bound to a patch size.
#[derive(Debug, Clone)]
pub struct EotTransform {
    height: usize,
    width: usize,
    /// Bilinear source taps per output pixel (rotation and scale about the centre).
    taps: Vec<[(usize, f64); 4]>,
    /// Normalised Gaussian weights for offsets `-r..=r`; empty when there is no blur.
    kernel: Vec<f64>,
    brightness: f64,
}

impl EotTransform {
    pub fn new(height: usize, width: usize, s: &EotSample) -> Self {
        let (sin, cos) = s.rotation_deg.to_radians().sin_cos();
        let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
        let mut taps = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                // Inverse map: undo scale, then rotate back, in pixel-centre coordinates.
                let u = (col as f64 + 0.5 - cx) / s.scale;
                let v = (row as f64 + 0.5 - cy) / s.scale;
                let sx = cos * u + sin * v + cx - 0.5;
                let sy = -sin * u + cos * v + cy - 0.5;
                taps.push(bilinear(sx, sy, width, height));
            }
        }
        Self {
            height,
            width,
            taps,
            kernel: gaussian_kernel(s.blur_radius),
            brightness: s.brightness,
        }
    }

    pub fn identity(height: usize, width: usize) -> Self {
        Self::new(height, width, &EotSample::IDENTITY)
    }

    fn check(&self, p: &Patch) {
        assert_eq!(
            (p.height, p.width),
            (self.height, self.width),
            "patch size differs from transform"
        );
    }

    /// Transformed values before the final clamp.
    fn linear(&self, p: &Patch) -> Vec<f64> {
        self.check(p);
        let n = self.height * self.width;
        let mut out = vec![0.0; n * CHANNELS];
        for (o, taps) in self.taps.iter().enumerate() {
            for &(src, w) in taps {
                if w != 0.0 {
                    for c in 0..CHANNELS {
                        out[o * CHANNELS + c] += w * p.pixels[src * CHANNELS + c];
                    }
                }
            }
        }
        if !self.kernel.is_empty() {
            out = blur_rows(&out, self.height, self.width, &self.kernel, false);
            out = blur_cols(&out, self.height, self.width, &self.kernel, false);
        }
        for v in &mut out {
            *v *= self.brightness;
        }
        out
    }

    pub fn apply(&self, p: &Patch) -> Patch {
        let mut pixels = self.linear(p);
        for v in &mut pixels {
            *v = v.clamp(0.0, 1.0);
        }
        Patch {
            height: self.height,
            width: self.width,
            pixels,
        }
    }

    /// Pulls a gradient on the transformed patch back onto the input patch.
    pub fn backward(&self, p: &Patch, grad_out: &[f64]) -> Vec<f64> {
        let z = self.linear(p);
        assert_eq!(grad_out.len(), z.len());
        let mut g: Vec<f64> = grad_out
            .iter()
            .zip(&z)
            .map(|(&g, &v)| {
                if (0.0..=1.0).contains(&v) {
                    g * self.brightness
                } else {
                    0.0
                }
            })
            .collect();
        if !self.kernel.is_empty() {
            g = blur_cols(&g, self.height, self.width, &self.kernel, true);
            g = blur_rows(&g, self.height, self.width, &self.kernel, true);
        }
        let mut out = vec![0.0; g.len()];
        for (o, taps) in self.taps.iter().enumerate() {
            for &(src, w) in taps {
                if w != 0.0 {
                    for c in 0..CHANNELS {
                        out[src * CHANNELS + c] += w * g[o * CHANNELS + c];
                    }
                }
            }
        }
        out
    }
}

/// Draws one transform from `params` with `seed` and applies it.
pub fn apply_eot(p: &Patch, params: &EotParams, seed: u64) -> Patch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EotTransform::new(p.height, p.width, &params.sample(&mut rng)).apply(p)
}

/// Bilinear taps at `(x, y)` in pixel-centre coordinates, clamped to the edge.
fn bilinear(x: f64, y: f64, width: usize, height: usize) -> [(usize, f64); 4] {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    [
        (y0 * width + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * width + x1, fx * (1.0 - fy)),
        (y1 * width + x0, (1.0 - fx) * fy),
        (y1 * width + x1, fx * fy),
    ]
}

/// Gaussian with sigma equal to the radius, truncated at three sigma.
fn gaussian_kernel(radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return Vec::new();
    }
    let half = (3.0 * radius).ceil() as i64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|t| (-(t * t) as f64 / (2.0 * radius * radius)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Half-sample symmetric reflection (`... b a | a b c | c b ...`) for any offset.
fn reflect(i: i64, n: usize) -> usize {
    let period = 2 * n as i64;
    let k = i.rem_euclid(period);
    if k >= n as i64 {
        (period - 1 - k) as usize
    } else {
        k as usize
    }
}

/// 1-D convolution along rows. The transpose scatters instead of gathers; with this
/// padding the matrix is symmetric, but the explicit form keeps the adjoint honest.
fn blur_rows(src: &[f64], height: usize, width: usize, k: &[f64], transpose: bool) -> Vec<f64> {
    let half = (k.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for row in 0..height {
        for col in 0..width {
            for (t, &w) in k.iter().enumerate() {
                let other = reflect(col as i64 + t as i64 - half, width);
                let (dst, from) = if transpose {
                    (row * width + other, row * width + col)
                } else {
                    (row * width + col, row * width + other)
                };
                for c in 0..CHANNELS {
                    out[dst * CHANNELS + c] += w * src[from * CHANNELS + c];
                }
            }
        }
    }
    out
}

fn blur_cols(src: &[f64], height: usize, width: usize, k: &[f64], transpose: bool) -> Vec<f64> {
    let half = (k.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for row in 0..height {
        for col in 0..width {
            for (t, &w) in k.iter().enumerate() {
                let other = reflect(row as i64 + t as i64 - half, height);
                let (dst, from) = if transpose {
                    (other * width + col, row * width + col)
                } else {
                    (row * width + col, other * width + col)
                };
                for c in 0..CHANNELS {
                    out[dst * CHANNELS + c] += w * src[from * CHANNELS + c];
                }
            }
        }
    }
    out
}
