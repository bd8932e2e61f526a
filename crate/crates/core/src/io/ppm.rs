//! Binary portable pixmaps (P6) for patches.

use crate::error::{Error, Result};
use crate::patchopt::patch::{Patch, CHANNELS};

/// Nearest 8-bit level of a unit-interval value.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit P6 image, one byte per channel.
pub fn save_patch(p: &Patch) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", p.width, p.height).into_bytes();
    out.extend(p.pixels.iter().map(|&v| quantize(v)));
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, name: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("ppm header: missing or invalid {name}")))
    }
}

/// Reads a P6 image with any maxval up to 65535 (two bytes per sample above 255).
pub fn load_patch(bytes: &[u8]) -> Result<Patch> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::Format("ppm: expected magic number P6".into()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(Error::Format(format!(
            "ppm: maxval must lie in 1..=65535 (got {maxval})"
        )));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format(
            "ppm header: expected whitespace before pixel data".into(),
        ));
    }
    let data = &bytes[h.pos + 1..];
    let per = if maxval > 255 { 2 } else { 1 };
    let samples = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or_else(|| Error::Format("ppm: image dimensions overflow".into()))?;
    if data.len() != samples * per {
        return Err(Error::Format(format!(
            "ppm: expected {} bytes of pixel data for {width}x{height}, found {}",
            samples * per,
            data.len()
        )));
    }
    let scale = maxval as f64;
    let pixels = if per == 1 {
        data.iter().map(|&b| (b as f64 / scale).min(1.0)).collect()
    } else {
        data.chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 / scale).min(1.0))
            .collect()
    };
    Patch::from_pixels(height, width, pixels)
}
