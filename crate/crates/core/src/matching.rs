//! Descriptor distances and threshold-swept match sets between two images.
//!
//! Matching is by plain Euclidean distance under a strict threshold; a
//! feature may appear in several matches (many-to-many). Sentinel (all-zero)
//! descriptors are unmatched by construction: their distance to everything
//! is +∞.

use crate::descriptor::NormalizedDescriptor;
use crate::evaluation::FeatureFrame;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("descriptor sets must be non-empty")]
    EmptySet,
    #[error("frame count {frames} does not match descriptor count {descriptors}")]
    LengthMismatch { frames: usize, descriptors: usize },
    #[error("descriptor lengths differ within or across sets: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Frames and their descriptors for one image; parallel lists, indices
/// identify features.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub frames: Vec<FeatureFrame>,
    pub descriptors: Vec<NormalizedDescriptor>,
}

impl DescriptorSet {
    pub fn new(
        frames: Vec<FeatureFrame>,
        descriptors: Vec<NormalizedDescriptor>,
    ) -> Result<Self, MatchingError> {
        if frames.len() != descriptors.len() {
            return Err(MatchingError::LengthMismatch {
                frames: frames.len(),
                descriptors: descriptors.len(),
            });
        }
        Ok(Self { frames, descriptors })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Dense rows × cols distance table, row-major; rows index set A, columns
/// set B.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceTable {
    /// Builds a table directly from row data; rows must be equally long.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MatchingError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MatchingError::EmptySet);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(MatchingError::DimensionMismatch(cols, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Minimum and maximum over the finite entries, if any exist.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for &d in &self.data {
            if d.is_finite() {
                range = Some(match range {
                    None => (d, d),
                    Some((lo, hi)) => (lo.min(d), hi.max(d)),
                });
            }
        }
        range
    }
}

/// One admitted pair: indices into the two sets plus their distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f64,
}

/// All pairs admitted at one threshold, in (index_a, index_b) order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<Match>,
    pub threshold: f64,
}

/// Euclidean distances between all descriptor pairs. Any pair involving a
/// sentinel descriptor gets +∞.
pub fn pairwise_distances(
    a: &DescriptorSet,
    b: &DescriptorSet,
) -> Result<DistanceTable, MatchingError> {
    if a.is_empty() || b.is_empty() {
        return Err(MatchingError::EmptySet);
    }
    let dim = a.descriptors[0].bins.len();
    for d in a.descriptors.iter().chain(&b.descriptors) {
        if d.bins.len() != dim {
            return Err(MatchingError::DimensionMismatch(dim, d.bins.len()));
        }
    }
    let cols = b.len();
    let data: Vec<f64> = a
        .descriptors
        .par_iter()
        .flat_map_iter(|da| {
            b.descriptors.iter().map(move |db| {
                if da.is_sentinel() || db.is_sentinel() {
                    f64::INFINITY
                } else {
                    da.bins
                        .iter()
                        .zip(&db.bins)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                }
            })
        })
        .collect();
    Ok(DistanceTable { rows: a.len(), cols, data })
}

/// All pairs with distance strictly below `t`, ordered by (index_a,
/// index_b). `t` must be positive.
pub fn matches_at_threshold(distances: &DistanceTable, t: f64) -> MatchSet {
    assert!(t > 0.0, "match threshold must be positive, got {t}");
    let mut pairs = Vec::new();
    for i in 0..distances.rows() {
        for j in 0..distances.cols() {
            let d = distances.get(i, j);
            if d < t {
                pairs.push(Match { index_a: i, index_b: j, distance: d });
            }
        }
    }
    MatchSet { pairs, threshold: t }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn frame(x: f64, y: f64) -> FeatureFrame {
        FeatureFrame::new(x, y, 1.0, 0.0).unwrap()
    }

    fn axis_unit(dim: usize, axis: usize) -> NormalizedDescriptor {
        let mut bins = vec![0.0; dim];
        bins[axis] = 1.0;
        NormalizedDescriptor { bins }
    }

    fn sentinel(dim: usize) -> NormalizedDescriptor {
        NormalizedDescriptor { bins: vec![0.0; dim] }
    }

    fn set(descriptors: Vec<NormalizedDescriptor>) -> DescriptorSet {
        let frames = (0..descriptors.len()).map(|i| frame(i as f64, 0.0)).collect();
        DescriptorSet::new(frames, descriptors).unwrap()
    }

    #[test]
    fn distances_of_unit_vectors() {
        let a = set(vec![axis_unit(4, 0), axis_unit(4, 1)]);
        let b = set(vec![axis_unit(4, 0), sentinel(4)]);
        let t = pairwise_distances(&a, &b).unwrap();
        assert_eq!(t.get(0, 0), 0.0);
        assert!((t.get(1, 0) - SQRT_2).abs() < 1e-12);
        assert_eq!(t.get(0, 1), f64::INFINITY);
        assert_eq!(t.get(1, 1), f64::INFINITY);
        assert_eq!(t.finite_range(), Some((0.0, SQRT_2)));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let a = set(vec![axis_unit(4, 0)]);
        let empty = DescriptorSet::new(vec![], vec![]).unwrap();
        assert_eq!(pairwise_distances(&a, &empty), Err(MatchingError::EmptySet));
        assert_eq!(pairwise_distances(&empty, &a), Err(MatchingError::EmptySet));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let a = set(vec![axis_unit(4, 0)]);
        let b = set(vec![axis_unit(5, 0)]);
        assert!(matches!(
            pairwise_distances(&a, &b),
            Err(MatchingError::DimensionMismatch(4, 5))
        ));
        assert!(DescriptorSet::new(vec![frame(0.0, 0.0)], vec![]).is_err());
    }

    #[test]
    fn threshold_is_strict_and_ordering_deterministic() {
        let a = set(vec![axis_unit(4, 0), axis_unit(4, 1)]);
        let b = set(vec![axis_unit(4, 0)]);
        let t = pairwise_distances(&a, &b).unwrap();

        // Below the minimum distance: nothing.
        let far = DistanceTable::from_rows(vec![vec![0.5, 1.0]]).unwrap();
        assert!(matches_at_threshold(&far, 0.2).pairs.is_empty());
        // 1.5 admits both.
        let m = matches_at_threshold(&t, 1.5);
        assert_eq!(m.pairs.len(), 2);
        assert_eq!((m.pairs[0].index_a, m.pairs[0].index_b), (0, 0));
        assert_eq!((m.pairs[1].index_a, m.pairs[1].index_b), (1, 0));
        // Exactly √2 excludes the √2 pair.
        let m = matches_at_threshold(&t, SQRT_2);
        assert_eq!(m.pairs.len(), 1);
        // Above the unit-sphere diameter: every finite pair.
        let m = matches_at_threshold(&t, 2.5);
        assert_eq!(m.pairs.len(), 2);
    }

    #[test]
    fn match_sets_grow_monotonically_with_t() {
        let a = set(vec![axis_unit(8, 0), axis_unit(8, 3), axis_unit(8, 5)]);
        let b = set(vec![axis_unit(8, 0), axis_unit(8, 5), sentinel(8)]);
        let table = pairwise_distances(&a, &b).unwrap();
        let mut previous: Vec<(usize, usize)> = Vec::new();
        for i in 1..=20 {
            let t = 0.15 * i as f64;
            let now: Vec<(usize, usize)> = matches_at_threshold(&table, t)
                .pairs
                .iter()
                .map(|m| (m.index_a, m.index_b))
                .collect();
            assert!(previous.iter().all(|p| now.contains(p)), "t={t}");
            previous = now;
        }
    }

    #[test]
    fn swapping_sets_transposes_matches() {
        let a = set(vec![axis_unit(4, 0), axis_unit(4, 1), axis_unit(4, 2)]);
        let b = set(vec![axis_unit(4, 1), axis_unit(4, 0)]);
        let ab = pairwise_distances(&a, &b).unwrap();
        let ba = pairwise_distances(&b, &a).unwrap();
        for i in 0..a.len() {
            for j in 0..b.len() {
                assert_eq!(ab.get(i, j), ba.get(j, i));
            }
        }
        let m_ab: Vec<(usize, usize)> = matches_at_threshold(&ab, 1.0)
            .pairs
            .iter()
            .map(|m| (m.index_a, m.index_b))
            .collect();
        let mut m_ba: Vec<(usize, usize)> = matches_at_threshold(&ba, 1.0)
            .pairs
            .iter()
            .map(|m| (m.index_b, m.index_a))
            .collect();
        m_ba.sort();
        assert_eq!(m_ab, m_ba);
    }

    #[test]
    fn from_rows_validates_shape() {
        assert!(DistanceTable::from_rows(vec![]).is_err());
        assert!(DistanceTable::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        let t = DistanceTable::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(t.get(1, 0), 3.0);
        assert_eq!(t.finite_range(), Some((1.0, 4.0)));
        let t = DistanceTable::from_rows(vec![vec![f64::INFINITY]]).unwrap();
        assert_eq!(t.finite_range(), None);
    }
}
