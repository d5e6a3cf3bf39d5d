//! Traversable-plant recognition for field robots.
//!
//! A procedural vineyard-like world supplies rendered frames with ground
//! truth; robot traversals produce weak traversability labels; a
//! positive-unlabeled classifier learns per-pixel traversability; a Bayesian
//! semantic voxel map fuses predictions over time; and a small navigation
//! simulator compares geometry-only obstacle handling against the fused map.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod navsim;
pub mod optim;
pub mod pipeline;
pub mod pixelnet;
pub mod pu;
pub mod seed;
pub mod travmask;
pub mod voxelfusion;
pub mod world;

pub use error::{Error, Result};
