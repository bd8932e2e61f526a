//! How much of a patched target's detection score survives the patch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::detector::{DetectorConfig, SurrogateDetector};
use super::eot::{EotParams, EotTransform};
use super::objective::GENUINE_IOU;
use super::patch::Patch;
use super::render::{render, Scene};
use crate::error::{Error, Result};
use crate::geometry::iou;

/// Mean ratio of the best genuine score with the patch shown (under `samples` random
/// transforms) to the best genuine score without it. Patched targets the clean
/// detector misses are skipped.
pub fn score_retention(
    scenes: &[Scene],
    patch: &Patch,
    eot: &EotParams,
    detector: &DetectorConfig,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    eot.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut count) = (0.0, 0usize);
    for scene in scenes {
        let det = SurrogateDetector::new(detector.clone(), scene.width, scene.height)?;
        let clean = det.scores(&render(scene, None).0);
        let draws: Vec<Vec<f64>> = (0..samples.max(1))
            .map(|_| {
                let t = EotTransform::new(patch.height, patch.width, &eot.sample(&mut rng));
                det.scores(&render(scene, Some(&t.apply(patch))).0)
            })
            .collect();
        for target in scene.targets.iter().filter(|t| t.patch.is_some()) {
            let genuine: Vec<usize> = det
                .anchors()
                .iter()
                .enumerate()
                .filter(|(_, a)| iou(&a.bbox(), &target.bbox) >= GENUINE_IOU)
                .map(|(k, _)| k)
                .collect();
            let best = |s: &[f64]| genuine.iter().map(|&k| s[k]).fold(0.0_f64, f64::max);
            let base = best(&clean);
            if base < detector.score_threshold {
                continue;
            }
            for d in &draws {
                sum += best(d) / base;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Undefined {
            what: "score retention",
            why: "no patched target is detected without the patch",
        });
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchopt::optimize::fixture_scenes;

    #[test]
    fn bright_patch_keeps_more_than_dark() {
        let scenes = fixture_scenes();
        let cfg = DetectorConfig::default();
        let id = EotParams::identity();
        let dark = score_retention(&scenes, &Patch::filled(8, 8, 0.0).unwrap(), &id, &cfg, 1, 1).unwrap();
        let body = score_retention(&scenes, &Patch::filled(8, 8, 0.8).unwrap(), &id, &cfg, 1, 1).unwrap();
        assert!(dark < 0.5, "{dark}");
        assert!(
            (body - 1.0).abs() < 1e-9,
            "a patch matching the body changes nothing: {body}"
        );
        let varied = score_retention(
            &scenes,
            &Patch::filled(8, 8, 0.0).unwrap(),
            &EotParams::default(),
            &cfg,
            4,
            3,
        )
        .unwrap();
        assert!(varied.is_finite());
    }

    #[test]
    fn undetected_targets_make_it_undefined() {
        let mut scenes = fixture_scenes();
        scenes.truncate(1);
        scenes[0].targets[0].intensity = scenes[0].background;
        let r = score_retention(
            &scenes,
            &Patch::filled(4, 4, 0.5).unwrap(),
            &EotParams::identity(),
            &DetectorConfig::default(),
            1,
            1,
        );
        assert!(r.is_err());
    }
}
