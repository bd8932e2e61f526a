//! Patch training: adversarial losses, transformation sampling, a differentiable
//! surrogate detector and the optimisation loop that ties them together.

pub mod clip;
pub mod detector;
pub mod eot;
pub mod gradcheck;
pub mod loss;
pub mod objective;
pub mod optimize;
pub mod patch;
pub mod render;
pub mod retention;

pub use clip::{build_clip_dataset, joint_dataset};
pub use detector::{DetectorConfig, Raster, SurrogateDetector};
pub use eot::{apply_eot, EotParams, EotSample, EotTransform};
pub use gradcheck::{grad_fd, max_relative_error};
pub use loss::{loss_ap, loss_bbr, loss_total, loss_tv, LossWeights};
pub use objective::{LossBreakdown, Objective};
pub use optimize::{
    fixture_scenes, initial_patch, mean_loss, optimize_from, optimize_patch, smooth_gradient, OptimizeConfig,
    PatchInit, Schedule, StepRule, TraceRow,
};
pub use patch::Patch;
pub use render::{render, Scene, SceneTarget};
pub use retention::score_retention;
