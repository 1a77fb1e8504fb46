//! Ground-truth evaluation: homography-induced region correspondence,
//! precision-recall curves over a distance-threshold sweep, and (mean)
//! average precision.
//!
//! Two features correspond when the first frame's circular region, mapped
//! through the local affine approximation of the ground-truth homography,
//! overlaps the second frame's circle with intersection-over-union above
//! one half. Correspondences are made one-to-one greedily by decreasing
//! overlap. A match is correct when its index pair is a correspondence.

use crate::matching::DistanceTable;
use rayon::prelude::*;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("frame fields must be finite with positive scale: x={x}, y={y}, scale={scale}, orientation={orientation}")]
    BadFrame { x: f64, y: f64, scale: f64, orientation: f64 },
    #[error("homography entries must be finite")]
    NonFiniteHomography,
    #[error("homography is singular after normalization (|det| = {0:e})")]
    SingularHomography(f64),
    #[error("threshold sweep needs at least 2 samples, got {0}")]
    BadSampleCount(usize),
    #[error("no ground-truth correspondences: average precision is zero by convention")]
    NoCorrespondences,
    #[error("cannot average an empty group")]
    EmptyGroup,
}

/// Geometric anchor of a feature: center, region radius, orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub orientation: f64,
}

impl FeatureFrame {
    pub fn new(x: f64, y: f64, scale: f64, orientation: f64) -> Result<Self, EvalError> {
        if !(x.is_finite() && y.is_finite() && orientation.is_finite())
            || !(scale.is_finite() && scale > 0.0)
        {
            return Err(EvalError::BadFrame { x, y, scale, orientation });
        }
        Ok(Self { x, y, scale, orientation })
    }
}

/// Plane projective map, stored normalized so the (3,3) entry is 1 whenever
/// it is nonzero. Must be invertible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

impl Homography {
    pub fn new(entries: [[f64; 3]; 3]) -> Result<Self, EvalError> {
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteHomography);
        }
        let mut m = entries;
        let h33 = m[2][2];
        if h33 != 0.0 {
            for row in &mut m {
                for v in row.iter_mut() {
                    *v /= h33;
                }
            }
        }
        let d = det3(&m);
        if d.abs() <= 1e-12 {
            return Err(EvalError::SingularHomography(d.abs()));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Similarity transform: rotate by `angle`, scale by `scale`, then
    /// translate by (tx, ty).
    pub fn similarity(scale: f64, angle: f64, tx: f64, ty: f64) -> Result<Self, EvalError> {
        let (s, c) = angle.sin_cos();
        Self::new([
            [scale * c, -scale * s, tx],
            [scale * s, scale * c, ty],
            [0.0, 0.0, 1.0],
        ])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    /// Maps a point; the result is non-finite for points on the line sent
    /// to infinity.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        (
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        )
    }

    pub fn inverse(&self) -> Result<Self, EvalError> {
        let m = &self.m;
        let d = det3(m);
        // Adjugate transpose over the determinant.
        let inv = [
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d,
            ],
        ];
        Self::new(inv)
    }

    /// Jacobian of the map at (x, y): the local affine approximation.
    pub fn local_affine(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        let xp = (m[0][0] * x + m[0][1] * y + m[0][2]) / w;
        let yp = (m[1][0] * x + m[1][1] * y + m[1][2]) / w;
        [
            [(m[0][0] - xp * m[2][0]) / w, (m[0][1] - xp * m[2][1]) / w],
            [(m[1][0] - yp * m[2][0]) / w, (m[1][1] - yp * m[2][1]) / w],
        ]
    }
}

/// One point of the curve; `one_minus_precision` is 1.0 at thresholds with
/// zero matches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PRPoint {
    pub recall: f64,
    pub one_minus_precision: f64,
    pub threshold: f64,
}

/// Precision-recall curve over a uniform threshold sweep, with the raw
/// per-threshold counts retained for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    pub points: Vec<PRPoint>,
    pub correct_matches: Vec<usize>,
    pub false_matches: Vec<usize>,
    pub correspondences: usize,
}

/// Average precision plus the per-threshold counts it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct APResult {
    pub ap: f64,
    pub correct_matches: Vec<usize>,
    pub false_matches: Vec<usize>,
    pub correspondences: usize,
}

const OVERLAP_THRESHOLD: f64 = 0.5;
const BASE_RASTER: usize = 128;
const REFINED_RASTER: usize = 256;
const REFINE_BAND: f64 = 0.05;
const DEGENERATE_JACOBIAN: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Box2 {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Box2 {
    fn intersects(&self, other: &Box2) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    fn union(&self, other: &Box2) -> Box2 {
        Box2 {
            x0: self.x0.min(other.x0),
            x1: self.x1.max(other.x1),
            y0: self.y0.min(other.y0),
            y1: self.y1.max(other.y1),
        }
    }
}

/// Ellipse = image of a circle of radius r under the affine map j around
/// center c; membership is tested through the inverse of j.
struct MappedRegion {
    cx: f64,
    cy: f64,
    r: f64,
    inv: [[f64; 2]; 2],
    bbox: Box2,
}

impl MappedRegion {
    fn ellipse(cx: f64, cy: f64, r: f64, j: &[[f64; 2]; 2]) -> Option<Self> {
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < DEGENERATE_JACOBIAN {
            return None;
        }
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let ex = r * j[0][0].hypot(j[0][1]);
        let ey = r * j[1][0].hypot(j[1][1]);
        Some(Self {
            cx,
            cy,
            r,
            inv,
            bbox: Box2 { x0: cx - ex, x1: cx + ex, y0: cy - ey, y1: cy + ey },
        })
    }

    fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Self {
            cx,
            cy,
            r,
            inv: [[1.0, 0.0], [0.0, 1.0]],
            bbox: Box2 { x0: cx - r, x1: cx + r, y0: cy - r, y1: cy + r },
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = self.inv[0][0] * dx + self.inv[0][1] * dy;
        let v = self.inv[1][0] * dx + self.inv[1][1] * dy;
        u * u + v * v <= self.r * self.r
    }
}

fn rasterized_iou(a: &MappedRegion, b: &MappedRegion, n: usize) -> f64 {
    let bb = a.bbox.union(&b.bbox);
    let sx = (bb.x1 - bb.x0) / n as f64;
    let sy = (bb.y1 - bb.y0) / n as f64;
    let mut in_a = 0u64;
    let mut in_b = 0u64;
    let mut both = 0u64;
    for iy in 0..n {
        let y = bb.y0 + (iy as f64 + 0.5) * sy;
        for ix in 0..n {
            let x = bb.x0 + (ix as f64 + 0.5) * sx;
            let pa = a.contains(x, y);
            let pb = b.contains(x, y);
            in_a += pa as u64;
            in_b += pb as u64;
            both += (pa && pb) as u64;
        }
    }
    let union = in_a + in_b - both;
    if union == 0 {
        0.0
    } else {
        both as f64 / union as f64
    }
}

/// Intersection-over-union between frame A's region mapped into image B
/// (via the local affine of `h` at A's center) and frame B's circle.
/// Computed by rasterization over the joint bounding box; refined at double
/// resolution when the coarse value sits near the 0.5 decision boundary.
pub fn region_overlap(fa: &FeatureFrame, fb: &FeatureFrame, h: &Homography) -> f64 {
    let (cx, cy) = h.apply(fa.x, fa.y);
    if !(cx.is_finite() && cy.is_finite()) {
        return 0.0;
    }
    let j = h.local_affine(fa.x, fa.y);
    let Some(region_a) = MappedRegion::ellipse(cx, cy, fa.scale, &j) else {
        return 0.0;
    };
    let region_b = MappedRegion::circle(fb.x, fb.y, fb.scale);
    if !region_a.bbox.intersects(&region_b.bbox) {
        return 0.0;
    }
    let coarse = rasterized_iou(&region_a, &region_b, BASE_RASTER);
    if (coarse - OVERLAP_THRESHOLD).abs() < REFINE_BAND {
        rasterized_iou(&region_a, &region_b, REFINED_RASTER)
    } else {
        coarse
    }
}

/// Ground-truth correspondences: all pairs with overlap above one half,
/// thinned to one-to-one by greedy selection in decreasing overlap order.
/// Returned sorted by (index_a, index_b).
pub fn correspondences(
    frames_a: &[FeatureFrame],
    frames_b: &[FeatureFrame],
    h: &Homography,
) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = frames_a
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ia, fa)| {
            frames_b.iter().enumerate().filter_map(move |(ib, fb)| {
                let ov = region_overlap(fa, fb, h);
                (ov > OVERLAP_THRESHOLD).then_some((ov, ia, ib))
            })
        })
        .collect();
    candidates.sort_by(|p, q| {
        q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2))
    });
    let mut used_a = vec![false; frames_a.len()];
    let mut used_b = vec![false; frames_b.len()];
    let mut pairs = Vec::new();
    for (_, ia, ib) in candidates {
        if !used_a[ia] && !used_b[ib] {
            used_a[ia] = true;
            used_b[ib] = true;
            pairs.push((ia, ib));
        }
    }
    pairs.sort();
    pairs
}

/// Uniform thresholds over the table's finite distance range. A degenerate
/// range widens to one unit; a table with no finite distance sweeps [0, 1]
/// (no threshold can admit a match there anyway).
pub fn sweep_thresholds(table: &DistanceTable, sample_count: usize) -> Vec<f64> {
    let (lo, hi) = match table.finite_range() {
        Some((lo, hi)) if hi > lo => (lo, hi),
        Some((lo, _)) => (lo, lo + 1.0),
        None => (0.0, 1.0),
    };
    (0..sample_count)
        .map(|i| {
            // Endpoints are pinned exactly: rounding must never push the
            // final threshold past the maximum distance, which would let
            // the strict inequality admit maximum-distance pairs.
            if i == 0 {
                lo
            } else if i == sample_count - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (sample_count - 1) as f64
            }
        })
        .collect()
}

/// Precision-recall curve of a distance table against a correspondence
/// set, over `sample_count` uniform thresholds. A match at threshold t is
/// any pair with distance strictly below t; it is correct when its index
/// pair is a correspondence.
pub fn pr_curve(
    table: &DistanceTable,
    correspondence_pairs: &[(usize, usize)],
    sample_count: usize,
) -> Result<PRCurve, EvalError> {
    if sample_count < 2 {
        return Err(EvalError::BadSampleCount(sample_count));
    }
    if correspondence_pairs.is_empty() {
        return Err(EvalError::NoCorrespondences);
    }
    let corr: HashSet<(usize, usize)> = correspondence_pairs.iter().copied().collect();

    // Sort finite distances once with correctness labels; per-threshold
    // counts are then prefix sums at a partition point.
    let mut labeled: Vec<(f64, bool)> = Vec::new();
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            let d = table.get(i, j);
            if d.is_finite() {
                labeled.push((d, corr.contains(&(i, j))));
            }
        }
    }
    labeled.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut correct_prefix = vec![0usize; labeled.len() + 1];
    for (i, &(_, ok)) in labeled.iter().enumerate() {
        correct_prefix[i + 1] = correct_prefix[i] + ok as usize;
    }

    let n_corr = corr.len();
    let mut points = Vec::with_capacity(sample_count);
    let mut correct_matches = Vec::with_capacity(sample_count);
    let mut false_matches = Vec::with_capacity(sample_count);
    for t in sweep_thresholds(table, sample_count) {
        let admitted = labeled.partition_point(|&(d, _)| d < t);
        let correct = correct_prefix[admitted];
        let false_count = admitted - correct;
        let recall = correct as f64 / n_corr as f64;
        let one_minus_precision = if admitted == 0 {
            1.0
        } else {
            false_count as f64 / admitted as f64
        };
        points.push(PRPoint { recall, one_minus_precision, threshold: t });
        correct_matches.push(correct);
        false_matches.push(false_count);
    }
    Ok(PRCurve { points, correct_matches, false_matches, correspondences: n_corr })
}

/// Interpolated average precision: at each of the curve's sample positions
/// (uniform over [0, 1]) take the maximum precision among curve points
/// whose recall reaches the position, and average. Zero matches at every
/// threshold yields exactly zero.
pub fn average_precision(curve: &PRCurve) -> APResult {
    let n = curve.points.len();
    let zero_matches = curve
        .correct_matches
        .iter()
        .zip(&curve.false_matches)
        .all(|(c, f)| c + f == 0);
    let ap = if zero_matches {
        0.0
    } else {
        let mut total = 0.0;
        for j in 0..n {
            let position = j as f64 / (n - 1) as f64;
            let best = curve
                .points
                .iter()
                .filter(|p| p.recall >= position)
                .map(|p| 1.0 - p.one_minus_precision)
                .fold(0.0, f64::max);
            total += best;
        }
        total / n as f64
    };
    APResult {
        ap,
        correct_matches: curve.correct_matches.clone(),
        false_matches: curve.false_matches.clone(),
        correspondences: curve.correspondences,
    }
}

/// Full pair evaluation with the zero-correspondence convention applied:
/// no correspondences means AP 0 with zeroed counts.
pub fn evaluate_pair(
    table: &DistanceTable,
    correspondence_pairs: &[(usize, usize)],
    sample_count: usize,
) -> Result<APResult, EvalError> {
    if sample_count < 2 {
        return Err(EvalError::BadSampleCount(sample_count));
    }
    if correspondence_pairs.is_empty() {
        return Ok(APResult {
            ap: 0.0,
            correct_matches: vec![0; sample_count],
            false_matches: vec![0; sample_count],
            correspondences: 0,
        });
    }
    Ok(average_precision(&pr_curve(table, correspondence_pairs, sample_count)?))
}

/// Arithmetic mean of average precisions over a non-empty group.
pub fn mean_ap(aps: &[f64]) -> Result<f64, EvalError> {
    if aps.is_empty() {
        return Err(EvalError::EmptyGroup);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
