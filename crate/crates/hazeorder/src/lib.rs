//! Depth-order-guided single image dehazing.
//!
//! The pipeline extracts a scene depth ordering from a hazy image (local-max
//! color difference to the airlight), estimates a transmission map through an
//! order-preserving transformation with a boundary-constrained global target,
//! and recovers the haze-free image. The crate also ships a forward haze
//! synthesizer, depth-order analysis tooling, and full-reference quality
//! metrics, plus a CLI wrapping all of it.

pub mod airlight;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod filters;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;

pub use crate::error::{Error, Result};
pub use crate::image::{AtmosphericLight, DehazeConfig, PlanarImage, ScalarMap, WeightFn};
pub use crate::pipeline::{dehaze, dehaze_with, synthesize_haze, PipelineTrace, SynthParams};
