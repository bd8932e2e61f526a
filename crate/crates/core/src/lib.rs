//! Multi-object tracking under patch-style identity attacks.
//!
//! Building blocks: box geometry, an optimal assignment solver, a constant-velocity
//! Kalman filter, a two-stage IoU tracker, effect-level attack injection, a differentiable
//! patch optimiser over a surrogate detector, CLEAR-MOT and attack metrics, synthetic
//! scenarios and file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod attack;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod patchopt;
pub mod pipeline;
pub mod scenario;
pub mod tracker;

pub use error::{Error, Result};
