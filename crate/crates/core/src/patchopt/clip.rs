//! Clip dataset: every patched target cropped out of every scene with a margin around it.

use super::render::{Scene, SceneTarget};
use crate::error::Result;
use crate::geometry::BBox;

/// Margin on each side as a fraction of the target's width and height.
pub const CROP_MARGIN: f64 = 0.2;

/// One sub-scene per (scene, patched target), with every target that reaches into the
/// crop translated into crop coordinates. Unpatched targets get no crop of their own.
pub fn build_clip_dataset(scenes: &[Scene]) -> Result<Vec<Scene>> {
    let mut out = Vec::new();
    for scene in scenes {
        for t in scene.targets.iter().filter(|t| t.patch.is_some()) {
            let b = t.bbox;
            let x0 = (b.x - CROP_MARGIN * b.w).floor().max(0.0);
            let y0 = (b.y - CROP_MARGIN * b.h).floor().max(0.0);
            let x1 = (b.right() + CROP_MARGIN * b.w).ceil().min(scene.width as f64);
            let y1 = (b.bottom() + CROP_MARGIN * b.h).ceil().min(scene.height as f64);
            let window = BBox::from_corners(x0, y0, x1, y1);
            let shift = |r: BBox| r.translate(-x0, -y0);
            let targets = scene
                .targets
                .iter()
                .filter(|o| o.bbox.intersection_area(&window) > 0.0)
                .map(|o| SceneTarget {
                    bbox: shift(o.bbox),
                    intensity: o.intensity,
                    patch: o.patch.map(shift),
                })
                .collect();
            out.push(Scene::new(
                (x1 - x0) as usize,
                (y1 - y0) as usize,
                scene.background,
                targets,
            )?);
        }
    }
    Ok(out)
}

/// Full scenes followed by their crops.
pub fn joint_dataset(scenes: &[Scene]) -> Result<Vec<Scene>> {
    let mut all = scenes.to_vec();
    all.extend(build_clip_dataset(scenes)?);
    Ok(all)
}
