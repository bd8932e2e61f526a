//! Flat-shaded scenes of rectangular pedestrians, each optionally wearing the patch.

use serde::{Deserialize, Serialize};

use super::detector::Raster;
use super::patch::{Patch, CHANNELS};
use crate::attack::place_patch;
use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneTarget {
    pub bbox: BBox,
    /// Base luminance of the target's texture.
    pub intensity: f64,
    /// Where the patch is drawn, if the target wears one.
    pub patch: Option<BBox>,
}

impl SceneTarget {
    /// A target wearing the patch on its upper torso.
    pub fn patched(bbox: BBox, intensity: f64) -> Self {
        Self {
            bbox,
            intensity,
            patch: Some(place_patch(&bbox)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    /// Drawn in order; later targets cover earlier ones.
    pub targets: Vec<SceneTarget>,
}

impl Scene {
    /// Clips targets and patch regions to the frame and drops any left empty.
    pub fn new(width: usize, height: usize, background: f64, targets: Vec<SceneTarget>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "scene must be non-empty (got {width}x{height})"
            )));
        }
        let frame = BBox::new(0.0, 0.0, width as f64, height as f64);
        let clip = |b: &BBox| {
            BBox::from_corners(
                b.x.max(frame.x),
                b.y.max(frame.y),
                b.right().min(frame.right()),
                b.bottom().min(frame.bottom()),
            )
        };
        let targets = targets
            .into_iter()
            .filter(|t| t.bbox.intersection_area(&frame) > 0.0)
            .map(|t| SceneTarget {
                bbox: clip(&t.bbox),
                intensity: t.intensity,
                patch: t.patch.filter(|p| p.intersection_area(&frame) > 0.0).map(|p| clip(&p)),
            })
            .collect();
        Ok(Self {
            width,
            height,
            background,
            targets,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Raster pixels that show the patch and the patch pixel each one samples.
#[derive(Debug, Clone, Default)]
pub struct RenderMap {
    pub taps: Vec<(usize, usize)>,
}

impl RenderMap {
    /// Pulls a raster gradient back onto patch channels (each channel gets a third of
    /// the luminance gradient).
    pub fn backward(&self, raster_grad: &[f64], patch_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; patch_len];
        for &(pix, src) in &self.taps {
            let g = raster_grad[pix] / CHANNELS as f64;
            for c in 0..CHANNELS {
                out[src * CHANNELS + c] += g;
            }
        }
        out
    }
}

/// Pixels whose centres fall inside `b`.
fn covered(b: &BBox, width: usize, height: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let span = |lo: f64, hi: f64, n: usize| {
        let a = (lo - 0.5).ceil().max(0.0) as usize;
        let z = ((hi - 0.5).ceil().max(0.0) as usize).min(n);
        a.min(z)..z
    };
    (span(b.x, b.right(), width), span(b.y, b.bottom(), height))
}

/// Draws the scene; `patch` is sampled nearest-neighbour into each patch region.
pub fn render(scene: &Scene, patch: Option<&Patch>) -> (Raster, RenderMap) {
    let mut r = Raster::filled(scene.width, scene.height, scene.background);
    let mut owner: Vec<Option<usize>> = vec![None; scene.width * scene.height];
    for t in &scene.targets {
        let (xs, ys) = covered(&t.bbox, scene.width, scene.height);
        for y in ys {
            for x in xs.clone() {
                let i = y * scene.width + x;
                r.data[i] = t.intensity;
                owner[i] = None;
            }
        }
        if let (Some(p), Some(region)) = (patch, t.patch) {
            let (xs, ys) = covered(&region, scene.width, scene.height);
            for y in ys {
                let row = (((y as f64 + 0.5 - region.y) / region.h * p.height as f64) as usize).min(p.height - 1);
                for x in xs.clone() {
                    let col = (((x as f64 + 0.5 - region.x) / region.w * p.width as f64) as usize).min(p.width - 1);
                    let i = y * scene.width + x;
                    r.data[i] = p.gray(row, col);
                    owner[i] = Some(row * p.width + col);
                }
            }
        }
    }
    let taps = owner
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|src| (i, src)))
        .collect();
    (r, RenderMap { taps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_targets_and_patch() {
        let scene = Scene::new(
            20,
            20,
            0.1,
            vec![SceneTarget {
                bbox: BBox::new(2.0, 2.0, 8.0, 12.0),
                intensity: 0.8,
                patch: Some(BBox::new(4.0, 4.0, 4.0, 4.0)),
            }],
        )
        .unwrap();
        let p = Patch::filled(2, 2, 0.3).unwrap();
        let (r, map) = render(&scene, Some(&p));
        assert_eq!(r.at(0, 0), 0.1);
        assert_eq!(r.at(2, 2), 0.8);
        assert_eq!(r.at(9, 13), 0.8);
        assert_eq!(r.at(10, 13), 0.1);
        assert!((r.at(5, 5) - 0.3).abs() < 1e-12);
        assert_eq!(map.taps.len(), 16);
        // Each 2x2 block of the region samples one patch pixel.
        let srcs: Vec<usize> = map.taps.iter().filter(|(i, _)| i / 20 == 4).map(|&(_, s)| s).collect();
        assert_eq!(srcs, vec![0, 0, 1, 1]);

        let (bare, empty) = render(&scene, None);
        assert_eq!(bare.at(5, 5), 0.8);
        assert!(empty.taps.is_empty());
    }

    #[test]
    fn later_target_covers_patch() {
        let a = SceneTarget {
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0),
            intensity: 0.5,
            patch: Some(BBox::new(0.0, 0.0, 10.0, 10.0)),
        };
        let b = SceneTarget {
            bbox: BBox::new(5.0, 0.0, 10.0, 10.0),
            intensity: 0.9,
            patch: None,
        };
        let scene = Scene::new(20, 10, 0.0, vec![a, b]).unwrap();
        let (r, map) = render(&scene, Some(&Patch::filled(4, 4, 0.2).unwrap()));
        assert_eq!(r.at(6, 3), 0.9);
        assert_eq!(map.taps.len(), 50);
    }

    #[test]
    fn clipping_drops_outside_targets() {
        let t = |x: f64| SceneTarget::patched(BBox::new(x, 0.0, 10.0, 20.0), 0.7);
        let s = Scene::new(30, 30, 0.0, vec![t(-20.0), t(25.0)]).unwrap();
        assert_eq!(s.targets.len(), 1);
        assert_eq!(s.targets[0].bbox.right(), 30.0);
    }
}
