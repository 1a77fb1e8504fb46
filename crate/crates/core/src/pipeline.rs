//! Orchestration: frames → patches → raw descriptors → clamped descriptor
//! sets → pair evaluation.
//!
//! Raw descriptors are built once per image and can be clamped under
//! several policies without resampling, which is how the benchmark
//! compares policies on identical gradient measurements.

use crate::acontrario::{AContrarioConfig, AContrarioError};
use crate::dataset::{extract_patch, Image};
use crate::descriptor::{
    build_descriptor, clamp, ClampPolicy, DescriptorError, HistogramGrid, RawDescriptor,
};
use crate::evaluation::{
    average_precision, correspondences, pr_curve, APResult, EvalError, FeatureFrame, Homography,
    PRCurve,
};
use crate::matching::{pairwise_distances, DescriptorSet, MatchingError};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("magnification must be positive and finite, got {0}")]
    BadMagnification(f64),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Stats(#[from] AContrarioError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Everything needed to turn frames into comparable descriptors.
#[derive(Debug, Clone)]
pub struct DescribeConfig {
    pub grid: HistogramGrid,
    pub policy: ClampPolicy,
    pub acontrario: AContrarioConfig,
    pub magnification: f64,
}

impl Default for DescribeConfig {
    fn default() -> Self {
        Self {
            grid: HistogramGrid::default(),
            policy: ClampPolicy::Lowe { c: 0.2 },
            acontrario: AContrarioConfig::default(),
            magnification: 3.0,
        }
    }
}

impl DescribeConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.magnification.is_finite() && self.magnification > 0.0) {
            return Err(PipelineError::BadMagnification(self.magnification));
        }
        self.acontrario.validate()?;
        Ok(())
    }
}

/// Frames that survived the border rule alongside their raw (unclamped)
/// descriptors, plus the indices of the frames that did not.
#[derive(Debug, Clone)]
pub struct RawDescription {
    pub frames: Vec<FeatureFrame>,
    pub raws: Vec<RawDescriptor>,
    pub skipped: Vec<usize>,
}

/// A clamped descriptor set plus the skip bookkeeping of its raw stage.
#[derive(Debug, Clone)]
pub struct DescribeOutcome {
    pub set: DescriptorSet,
    pub skipped: Vec<usize>,
}

/// Builds raw descriptors for every frame whose measurement region fits
/// inside the image; outputs preserve frame order.
pub fn describe_raw(
    image: &Image,
    frames: &[FeatureFrame],
    grid: &HistogramGrid,
    magnification: f64,
) -> Result<RawDescription, PipelineError> {
    if !(magnification.is_finite() && magnification > 0.0) {
        return Err(PipelineError::BadMagnification(magnification));
    }
    let described: Vec<(usize, Option<RawDescriptor>)> = frames
        .par_iter()
        .enumerate()
        .map(|(i, frame)| {
            let raw = extract_patch(image, frame, grid, magnification)
                .map(|patch| build_descriptor(&patch, grid));
            (i, raw)
        })
        .collect();
    let mut kept_frames = Vec::new();
    let mut raws = Vec::new();
    let mut skipped = Vec::new();
    for (i, raw) in described {
        match raw {
            Some(r) => {
                kept_frames.push(frames[i]);
                raws.push(r);
            }
            None => skipped.push(i),
        }
    }
    Ok(RawDescription { frames: kept_frames, raws, skipped })
}

/// Clamps previously built raw descriptors under one policy.
pub fn clamp_description(
    raw: &RawDescription,
    policy: ClampPolicy,
    acontrario: &AContrarioConfig,
    grid: &HistogramGrid,
) -> Result<DescribeOutcome, PipelineError> {
    let descriptors = raw
        .raws
        .par_iter()
        .map(|r| clamp(r, policy, acontrario, grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DescribeOutcome {
        set: DescriptorSet::new(raw.frames.clone(), descriptors)?,
        skipped: raw.skipped.clone(),
    })
}

/// One-shot describe: raw build plus clamp under the config's policy.
pub fn describe_image(
    image: &Image,
    frames: &[FeatureFrame],
    cfg: &DescribeConfig,
) -> Result<DescribeOutcome, PipelineError> {
    cfg.validate()?;
    let raw = describe_raw(image, frames, &cfg.grid, cfg.magnification)?;
    clamp_description(&raw, cfg.policy, &cfg.acontrario, &cfg.grid)
}

/// Evaluation result for one image pair under one policy.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub ap: APResult,
    pub curve: Option<PRCurve>,
    pub retained_a: usize,
    pub retained_b: usize,
    pub skipped_a: usize,
    pub skipped_b: usize,
}

/// Evaluates two described images against ground truth. An empty side or
/// an empty correspondence set short-circuits to the zero-AP convention.
pub fn evaluate_described_pair(
    a: &DescribeOutcome,
    b: &DescribeOutcome,
    h: &Homography,
    sweep_samples: usize,
) -> Result<PairOutcome, PipelineError> {
    if sweep_samples < 2 {
        return Err(EvalError::BadSampleCount(sweep_samples).into());
    }
    let zero = |correspondence_count: usize| PairOutcome {
        ap: APResult {
            ap: 0.0,
            correct_matches: vec![0; sweep_samples],
            false_matches: vec![0; sweep_samples],
            correspondences: correspondence_count,
        },
        curve: None,
        retained_a: a.set.len(),
        retained_b: b.set.len(),
        skipped_a: a.skipped.len(),
        skipped_b: b.skipped.len(),
    };
    if a.set.is_empty() || b.set.is_empty() {
        return Ok(zero(0));
    }
    let corr = correspondences(&a.set.frames, &b.set.frames, h);
    if corr.is_empty() {
        return Ok(zero(0));
    }
    let table = pairwise_distances(&a.set, &b.set)?;
    let curve = pr_curve(&table, &corr, sweep_samples)?;
    let ap = average_precision(&curve);
    Ok(PairOutcome {
        ap,
        curve: Some(curve),
        retained_a: a.set.len(),
        retained_b: b.set.len(),
        skipped_a: a.skipped.len(),
        skipped_b: b.skipped.len(),
    })
}
