//! Synthetic ground truth and simulated detector output for desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_to_frame, BBox, FrameDims};
use crate::tracker::Detection;

/// One ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    /// Fraction of the box not hidden by objects nearer the camera.
    #[serde(default = "full")]
    pub visibility: f64,
    /// Whether scoring counts this box. Ignored boxes neither miss nor absorb a track,
    /// and a hypothesis covering one is dropped rather than counted as false.
    #[serde(default = "yes")]
    pub considered: bool,
}

fn full() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl GtBox {
    pub fn new(frame: u32, id: i64, bbox: BBox) -> Self {
        Self {
            frame,
            id,
            bbox,
            visibility: 1.0,
            considered: true,
        }
    }
}

/// Ground truth for a whole sequence, ordered by frame then object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_frames: u32,
    pub boxes: Vec<GtBox>,
}

impl GroundTruth {
    pub fn new(n_frames: u32, mut boxes: Vec<GtBox>) -> Self {
        boxes.sort_by_key(|b| (b.frame, b.id));
        Self { n_frames, boxes }
    }

    pub fn frame(&self, frame: u32) -> impl Iterator<Item = &GtBox> {
        self.boxes.iter().filter(move |b| b.frame == frame)
    }

    pub fn by_frame(&self) -> Vec<Vec<GtBox>> {
        let mut out = vec![Vec::new(); self.n_frames as usize];
        for b in &self.boxes {
            if b.frame >= 1 && b.frame <= self.n_frames {
                out[b.frame as usize - 1].push(*b);
            }
        }
        out
    }

    pub fn ids(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self.boxes.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn get(&self, frame: u32, id: i64) -> Option<&GtBox> {
        self.boxes.iter().find(|b| b.frame == frame && b.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sway {
    /// Peak displacement in pixels.
    pub amplitude: f64,
    /// Period in frames.
    pub period: f64,
    /// Horizontal sway when true, vertical otherwise.
    #[serde(default)]
    pub horizontal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: i64,
    #[serde(default = "one")]
    pub entry_frame: u32,
    /// Box at the entry frame.
    pub initial: BBox,
    /// Pixels per frame.
    #[serde(default)]
    pub velocity: (f64, f64),
    #[serde(default)]
    pub sway: Option<Sway>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorNoise {
    /// Standard deviation of per-coordinate box jitter, pixels.
    pub jitter_sigma: f64,
    pub score_min: f64,
    pub score_max: f64,
    pub miss_prob: f64,
    /// Objects less visible than this are not detected.
    pub min_visibility: f64,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        Self {
            jitter_sigma: 0.0,
            score_min: 0.75,
            score_max: 0.95,
            miss_prob: 0.0,
            min_visibility: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub dims: FrameDims,
    pub n_frames: u32,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub noise: DetectorNoise,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::InvalidConfig("scenario needs at least one frame".into()));
        }
        FrameDims::new(self.dims.width, self.dims.height)?;
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.miss_prob) {
            return Err(Error::InvalidConfig("miss_prob must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&n.min_visibility) {
            return Err(Error::InvalidConfig("min_visibility must lie in [0, 1]".into()));
        }
        if !(0.0 <= n.score_min && n.score_min <= n.score_max && n.score_max <= 1.0) {
            return Err(Error::InvalidConfig("need 0 <= score_min <= score_max <= 1".into()));
        }
        if n.jitter_sigma < 0.0 || !n.jitter_sigma.is_finite() {
            return Err(Error::InvalidConfig("jitter_sigma must be non-negative".into()));
        }
        let mut ids: Vec<i64> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("object ids must be unique".into()));
        }
        Ok(())
    }

    /// Unclipped box of `obj` at `frame`, or `None` before it enters.
    pub fn raw_box(obj: &ObjectSpec, frame: u32) -> Option<BBox> {
        if frame < obj.entry_frame {
            return None;
        }
        let t = (frame - obj.entry_frame) as f64;
        let (mut dx, mut dy) = (obj.velocity.0 * t, obj.velocity.1 * t);
        if let Some(s) = obj.sway {
            let off = s.amplitude * (std::f64::consts::TAU * t / s.period).sin();
            if s.horizontal {
                dx += off;
            } else {
                dy += off;
            }
        }
        Some(obj.initial.translate(dx, dy))
    }

    /// Clipped ground truth with visibilities. A box is hidden by boxes whose bottom edge
    /// lies lower in the image (nearer the camera).
    pub fn ground_truth(&self) -> GroundTruth {
        let mut boxes = Vec::new();
        for frame in 1..=self.n_frames {
            let start = boxes.len();
            for obj in &self.objects {
                if let Some(b) = Self::raw_box(obj, frame) {
                    let clipped = clip_to_frame(&b, &self.dims);
                    if clipped.area() > 0.0 {
                        boxes.push(GtBox::new(frame, obj.id, clipped));
                    }
                }
            }
            let current: Vec<BBox> = boxes[start..].iter().map(|g| g.bbox).collect();
            for (i, g) in boxes[start..].iter_mut().enumerate() {
                let occluders: Vec<BBox> = current
                    .iter()
                    .enumerate()
                    .filter(|&(j, o)| j != i && o.bottom() > g.bbox.bottom())
                    .map(|(_, o)| *o)
                    .collect();
                g.visibility = 1.0 - covered_area(&g.bbox, &occluders) / g.bbox.area();
                g.considered = g.visibility >= self.noise.min_visibility;
            }
        }
        GroundTruth::new(self.n_frames, boxes)
    }
}

/// Area of `target` covered by the union of `others`.
pub fn covered_area(target: &BBox, others: &[BBox]) -> f64 {
    let pieces: Vec<BBox> = others
        .iter()
        .filter(|o| o.intersection_area(target) > 0.0)
        .map(|o| {
            BBox::from_corners(
                o.x.max(target.x),
                o.y.max(target.y),
                o.right().min(target.right()),
                o.bottom().min(target.bottom()),
            )
        })
        .collect();
    let mut xs: Vec<f64> = pieces.iter().flat_map(|p| [p.x, p.right()]).collect();
    let mut ys: Vec<f64> = pieces.iter().flat_map(|p| [p.y, p.bottom()]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let (cx, cy) = (0.5 * (xw[0] + xw[1]), 0.5 * (yw[0] + yw[1]));
            if pieces
                .iter()
                .any(|p| p.x <= cx && cx <= p.right() && p.y <= cy && cy <= p.bottom())
            {
                area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    area
}

/// Ground truth plus clean simulated detections (frame order, object order within a frame).
pub fn generate(spec: &ScenarioSpec) -> Result<(GroundTruth, Vec<Detection>)> {
    spec.validate()?;
    let gt = spec.ground_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.noise;
    let jitter = Normal::new(0.0, n.jitter_sigma.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut dets = Vec::with_capacity(gt.boxes.len());
    for g in &gt.boxes {
        // Draw every variate unconditionally so the stream does not depend on outcomes.
        let miss = rng.random::<f64>() < n.miss_prob;
        let score = if n.score_max > n.score_min {
            rng.random_range(n.score_min..=n.score_max)
        } else {
            n.score_min
        };
        let mut noise = [0.0; 4];
        for v in &mut noise {
            *v = if n.jitter_sigma > 0.0 {
                jitter.sample(&mut rng)
            } else {
                0.0
            };
        }
        if miss || g.visibility < n.min_visibility {
            continue;
        }
        let b = &g.bbox;
        let bbox = if n.jitter_sigma > 0.0 {
            BBox::new(
                b.x + noise[0],
                b.y + noise[1],
                (b.w + noise[2]).max(1.0),
                (b.h + noise[3]).max(1.0),
            )
        } else {
            *b
        };
        dets.push(Detection::new(bbox, score, g.frame));
    }
    Ok((gt, dets))
}

pub const PRESETS: [&str; 3] = ["single", "crossing", "stationary_patch"];

pub fn preset(name: &str) -> Result<ScenarioSpec> {
    let dims = FrameDims {
        width: 640.0,
        height: 480.0,
    };
    let mut noise = DetectorNoise {
        jitter_sigma: 1.0,
        ..DetectorNoise::default()
    };
    let objects = match name {
        "single" => vec![ObjectSpec {
            id: 1,
            entry_frame: 1,
            initial: BBox::new(80.0, 200.0, 40.0, 80.0),
            velocity: (3.0, 0.2),
            sway: None,
        }],
        "crossing" => {
            // A fast walker passes in front of a slow one; centres meet at frame 51 and
            // the rear walker goes undetected while mostly hidden.
            noise.min_visibility = 0.8;
            vec![
                ObjectSpec {
                    id: 1,
                    entry_frame: 1,
                    initial: BBox::new(100.0, 210.0, 40.0, 80.0),
                    velocity: (4.0, 0.0),
                    sway: None,
                },
                ObjectSpec {
                    id: 2,
                    entry_frame: 1,
                    initial: BBox::new(350.0, 200.0, 40.0, 80.0),
                    velocity: (-1.0, 0.0),
                    sway: None,
                },
            ]
        }
        "stationary_patch" => vec![
            // A patch board mounted at torso height that the detector fires on.
            ObjectSpec {
                id: 1,
                entry_frame: 1,
                initial: BBox::new(300.0, 215.0, 40.0, 80.0),
                velocity: (0.0, 0.0),
                sway: None,
            },
            ObjectSpec {
                id: 2,
                entry_frame: 1,
                initial: BBox::new(100.0, 205.0, 40.0, 80.0),
                velocity: (4.0, 0.0),
                sway: None,
            },
        ],
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(ScenarioSpec {
        dims,
        n_frames: 100,
        objects,
        noise,
        seed: 7,
    })
}
