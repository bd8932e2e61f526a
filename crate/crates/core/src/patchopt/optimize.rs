//! Projected gradient optimisation of the patch under random transformations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::detector::DetectorConfig;
use super::eot::{EotParams, EotTransform};
use super::objective::{LossBreakdown, Objective};
use super::patch::Patch;
use super::render::{Scene, SceneTarget};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Step size over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// Half-cosine from `step` down to zero at the last iteration.
    #[default]
    Cosine,
}

impl Schedule {
    pub fn at(&self, step: f64, it: u32, iterations: u32) -> f64 {
        match self {
            Schedule::Constant => step,
            Schedule::Cosine => {
                let t = (it - 1) as f64 / iterations.max(1) as f64;
                0.5 * step * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// How a gradient becomes a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Adam moments; each pixel moves by about `step` regardless of gradient scale.
    Adam,
    /// `step * sign(gradient)`.
    Sign,
    /// `step * gradient`.
    Plain,
    /// Gradient smoothed by `(I + smoothing * L)^-1` (L the grid Laplacian), then scaled
    /// so the largest pixel move is `step`. Damps the stiff high-frequency modes of the
    /// total-variation term while keeping the uniform-shift direction intact.
    #[default]
    Sobolev,
}

/// Starting patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatchInit {
    /// Uniform noise in `[0, 1]` drawn from the run seed.
    #[default]
    Random,
    /// Every channel at one grey level.
    Gray(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub patch_size: usize,
    pub iterations: u32,
    pub step: f64,
    pub seed: u64,
    pub init: PatchInit,
    pub rule: StepRule,
    pub schedule: Schedule,
    /// Laplacian weight for the `sobolev` rule.
    pub smoothing: f64,
    pub weights: super::loss::LossWeights,
    pub eot: EotParams,
    pub detector: DetectorConfig,
    /// Train on the full scenes plus their target crops.
    pub use_clips: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            patch_size: 32,
            iterations: 500,
            step: 0.05,
            seed: 7,
            init: PatchInit::Random,
            rule: StepRule::Sobolev,
            schedule: Schedule::Cosine,
            smoothing: 1e4,
            weights: Default::default(),
            eot: EotParams::default(),
            detector: DetectorConfig::default(),
            use_clips: true,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 2 {
            return Err(Error::DegeneratePatch {
                width: self.patch_size,
                height: self.patch_size,
            });
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step must be non-negative (got {})",
                self.step
            )));
        }
        if let PatchInit::Gray(g) = self.init {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidConfig(format!(
                    "init grey level must lie in [0, 1] (got {g})"
                )));
            }
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "smoothing must be non-negative (got {})",
                self.smoothing
            )));
        }
        self.weights.validate()?;
        self.eot.validate()?;
        self.detector.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u32,
    pub loss_bbr: f64,
    pub loss_tv: f64,
    pub loss_ap: f64,
    pub loss_total: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iteration,loss_bbr,loss_tv,loss_ap,loss_total";

    fn new(iteration: u32, l: &LossBreakdown) -> Self {
        Self {
            iteration,
            loss_bbr: l.bbr,
            loss_tv: l.tv,
            loss_ap: l.ap,
            loss_total: l.total,
        }
    }
}

/// The patch a run starts from. Random starts use their own stream of the run seed, so
/// they do not shift the transform and scene draws.
pub fn initial_patch(cfg: &OptimizeConfig) -> Result<Patch> {
    cfg.validate()?;
    let n = cfg.patch_size;
    match cfg.init {
        PatchInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1);
            Patch::random(n, n, 0.0, 1.0, &mut rng)
        }
        PatchInit::Gray(g) => Patch::filled(n, n, g),
    }
}

/// Starts from [`initial_patch`]; see [`optimize_from`].
pub fn optimize_patch(scenes: &[Scene], cfg: &OptimizeConfig) -> Result<(Patch, Vec<TraceRow>)> {
    optimize_from(scenes, initial_patch(cfg)?, cfg)
}

/// Each iteration draws one transform and one training scene, takes a step against the
/// gradient of the total loss and projects the pixels back into `[0, 1]`. The trace
/// holds the loss of each iteration's draw before its step.
pub fn optimize_from(scenes: &[Scene], start: Patch, cfg: &OptimizeConfig) -> Result<(Patch, Vec<TraceRow>)> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::EmptyInput("optimize_patch"));
    }
    let train = if cfg.use_clips {
        super::clip::joint_dataset(scenes)?
    } else {
        scenes.to_vec()
    };
    let mut objective = Objective::new(cfg.detector.clone(), cfg.weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut patch = start;
    patch.project();
    let n = patch.len();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);
    let mut trace = Vec::with_capacity(cfg.iterations as usize);

    for it in 1..=cfg.iterations {
        let sample = cfg.eot.sample(&mut rng);
        let scene = &train[rng.random_range(0..train.len())];
        let eot = EotTransform::new(patch.height, patch.width, &sample);
        let (loss, grad) = objective.loss_and_grad(scene, &patch, &eot)?;
        trace.push(TraceRow::new(it, &loss));
        let step = cfg.schedule.at(cfg.step, it, cfg.iterations);
        match cfg.rule {
            StepRule::Adam => {
                let (c1, c2) = (1.0 - b1.powi(it as i32), 1.0 - b2.powi(it as i32));
                for i in 0..n {
                    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                    patch.pixels[i] -= step * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
            StepRule::Sign => {
                for (p, g) in patch.pixels.iter_mut().zip(&grad) {
                    if *g != 0.0 {
                        *p -= step * g.signum();
                    }
                }
            }
            StepRule::Sobolev => {
                let d = smooth_gradient(&grad, patch.height, patch.width, cfg.smoothing);
                let top = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if top > 0.0 {
                    for (p, g) in patch.pixels.iter_mut().zip(&d) {
                        *p -= step * g / top;
                    }
                }
            }
            StepRule::Plain => {
                for (p, g) in patch.pixels.iter_mut().zip(&grad) {
                    *p -= step * g;
                }
            }
        }
        patch.project();
    }
    Ok((patch, trace))
}

/// Orthonormal DCT-II basis, `c[k][i]`.
fn dct_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos())
                .collect()
        })
        .collect()
}

/// Solves `(I + lambda L) u = g` per channel, L the Laplacian with reflecting borders,
/// which the DCT-II diagonalises.
pub fn smooth_gradient(g: &[f64], height: usize, width: usize, lambda: f64) -> Vec<f64> {
    use super::patch::CHANNELS;
    let (ch, cw) = (dct_basis(height), dct_basis(width));
    let eig = |k: usize, n: usize| 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos();
    let mut out = vec![0.0; g.len()];
    let mut tmp = vec![0.0; height * width];
    let mut spec = vec![0.0; height * width];
    for c in 0..CHANNELS {
        let at = |r: usize, q: usize| g[(r * width + q) * CHANNELS + c];
        // Forward: rows then columns.
        for r in 0..height {
            for k in 0..width {
                tmp[r * width + k] = (0..width).map(|q| cw[k][q] * at(r, q)).sum();
            }
        }
        for k in 0..height {
            for l in 0..width {
                let v: f64 = (0..height).map(|r| ch[k][r] * tmp[r * width + l]).sum();
                spec[k * width + l] = v / (1.0 + lambda * (eig(k, height) + eig(l, width)));
            }
        }
        // Inverse: the basis is orthonormal, so transpose.
        for r in 0..height {
            for l in 0..width {
                tmp[r * width + l] = (0..height).map(|k| ch[k][r] * spec[k * width + l]).sum();
            }
        }
        for r in 0..height {
            for q in 0..width {
                out[(r * width + q) * CHANNELS + c] = (0..width).map(|l| cw[l][q] * tmp[r * width + l]).sum();
            }
        }
    }
    out
}

/// Mean loss over `scenes` with the patch shown untransformed.
pub fn mean_loss(scenes: &[Scene], patch: &Patch, cfg: &OptimizeConfig) -> Result<LossBreakdown> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput("mean_loss"));
    }
    let mut objective = Objective::new(cfg.detector.clone(), cfg.weights)?;
    let eot = EotTransform::identity(patch.height, patch.width);
    let parts = scenes
        .iter()
        .map(|s| objective.loss(s, patch, &eot))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossBreakdown::mean(&parts))
}

/// Eight frames of one 40x80 walker wearing the patch on a 160x128 canvas, on the
/// detector's anchor grid; the reference fixture for optimisation runs.
pub fn fixture_scenes() -> Vec<Scene> {
    (0..8)
        .map(|t| {
            let b = BBox::new(20.0 + 8.0 * t as f64, 24.0, 40.0, 80.0);
            Scene::new(160, 128, 0.2, vec![SceneTarget::patched(b, 0.8)]).expect("fixture scene is valid")
        })
        .collect()
}
