//! Gradient-orientation descriptors with statistically calibrated clamping.
//!
//! The crate builds SIFT-style orientation histograms over image patches,
//! bounds their bins either with a fixed cap or with an a contrario
//! threshold calibrated to the descriptor's own sample mass, and measures
//! the effect on matching with a precision-recall benchmark driven by
//! homography ground truth.

pub mod acontrario;
pub mod dataset;
pub mod descriptor;
pub mod evaluation;
pub mod matching;
mod special;
