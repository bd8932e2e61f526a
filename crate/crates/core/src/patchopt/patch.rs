//! RGB patch with unit-interval channels, stored row-major as `[r, g, b]` triples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl Patch {
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::DegeneratePatch { width, height });
        }
        Ok(Self {
            height,
            width,
            pixels: vec![value; height * width * CHANNELS],
        })
    }

    pub fn from_pixels(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::DegeneratePatch { width, height });
        }
        if pixels.len() != height * width * CHANNELS {
            return Err(Error::LengthMismatch(format!(
                "{height}x{width} patch needs {} values, got {}",
                height * width * CHANNELS,
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    /// Uniform noise in `[lo, hi]`.
    pub fn random(height: usize, width: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::filled(height, width, 0.0)?;
        for v in &mut p.pixels {
            *v = rng.random_range(lo..=hi);
        }
        Ok(p)
    }

    pub fn idx(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * CHANNELS + ch
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.pixels[self.idx(row, col, ch)]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Channel mean at one pixel, the luminance the surrogate detector sees.
    pub fn gray(&self, row: usize, col: usize) -> f64 {
        let i = self.idx(row, col, 0);
        self.pixels[i..i + CHANNELS].iter().sum::<f64>() / CHANNELS as f64
    }

    /// Clamps every channel into `[0, 1]`.
    pub fn project(&mut self) {
        for v in &mut self.pixels {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|v| (0.0..=1.0).contains(v))
    }
}
