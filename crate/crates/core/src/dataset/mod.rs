//! Data ingestion: PGM rasters, homography and feature-frame text files,
//! Oxford-layout sequence directories, patch extraction, and synthetic
//! benchmark pairs.
//!
//! Text formats are whitespace-separated. A frame file holds one feature
//! per line as `x y scale orientation`, optionally followed by L
//! descriptor values; serialization uses shortest round-trip formatting,
//! so save followed by load is bit-exact.

pub mod pgm;
pub mod synth;

use crate::descriptor::{HistogramGrid, NormalizedDescriptor, Patch};
use crate::evaluation::{EvalError, FeatureFrame, Homography};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("image dimensions {width}x{height} do not match {len} pixels")]
    BadImageShape { width: usize, height: usize, len: usize },
}

impl DatasetError {
    fn malformed(path: &Path, message: impl Into<String>) -> Self {
        Self::Malformed { path: path.to_path_buf(), message: message.into() }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// Grayscale raster, row-major, intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, DatasetError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(DatasetError::BadImageShape { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    /// Pixel at column x, row y.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with edge replication: coordinates are clamped to
    /// the pixel-center domain [0, w−1] × [0, h−1] before interpolation.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Parsed frame file: frames plus, when the rows carry trailing values,
/// their descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFile {
    pub frames: Vec<FeatureFrame>,
    pub descriptors: Option<Vec<NormalizedDescriptor>>,
}

/// Parses nine whitespace-separated numbers (row-major 3×3) into a
/// homography, normalized on its (3,3) entry.
pub fn parse_homography(text: &str) -> Result<Homography, String> {
    let values: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
    let values = values.map_err(|e| format!("non-numeric entry: {e}"))?;
    if values.len() != 9 {
        return Err(format!("expected 9 numbers, found {}", values.len()));
    }
    let m = [
        [values[0], values[1], values[2]],
        [values[3], values[4], values[5]],
        [values[6], values[7], values[8]],
    ];
    Homography::new(m).map_err(|e| e.to_string())
}

/// Parses a frame file. Every row must have the same column count: 4 for
/// bare frames, 4 + L when descriptors are present. When
/// `expected_descriptor_len` is given, a present descriptor block must
/// have exactly that length. Loaded descriptors are renormalized to unit
/// length when their norm has drifted beyond 1e-12 (all-zero sentinels are
/// kept as-is).
pub fn parse_frames(
    text: &str,
    expected_descriptor_len: Option<usize>,
) -> Result<FrameFile, String> {
    let mut frames = Vec::new();
    let mut descriptors: Vec<NormalizedDescriptor> = Vec::new();
    let mut columns: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| format!("line {}: {e}", line_no + 1))?;
        if row.is_empty() {
            continue;
        }
        match columns {
            None => {
                if row.len() < 4 {
                    return Err(format!(
                        "line {}: expected at least 4 columns (x y scale orientation), found {}",
                        line_no + 1,
                        row.len()
                    ));
                }
                if let Some(l) = expected_descriptor_len {
                    if row.len() != 4 && row.len() != 4 + l {
                        return Err(format!(
                            "line {}: expected 4 or {} columns, found {}",
                            line_no + 1,
                            4 + l,
                            row.len()
                        ));
                    }
                }
                columns = Some(row.len());
            }
            Some(c) if c != row.len() => {
                return Err(format!(
                    "line {}: ragged row ({} columns, previous rows have {c})",
                    line_no + 1,
                    row.len()
                ));
            }
            _ => {}
        }
        let frame = FeatureFrame::new(row[0], row[1], row[2], row[3])
            .map_err(|e| format!("line {}: {e}", line_no + 1))?;
        frames.push(frame);
        if row.len() > 4 {
            let mut bins = row[4..].to_vec();
            let norm = bins.iter().map(|b| b * b).sum::<f64>().sqrt();
            if norm > 0.0 && (norm - 1.0).abs() > 1e-12 {
                for b in &mut bins {
                    *b /= norm;
                }
            }
            descriptors.push(NormalizedDescriptor { bins });
        }
    }
    let descriptors = match columns {
        Some(c) if c > 4 => Some(descriptors),
        _ => None,
    };
    Ok(FrameFile { frames, descriptors })
}

/// Serializes frames (and descriptors, when given) in the frame-file
/// format with shortest round-trip number formatting.
pub fn format_frames(
    frames: &[FeatureFrame],
    descriptors: Option<&[NormalizedDescriptor]>,
) -> String {
    let mut out = String::new();
    for (i, f) in frames.iter().enumerate() {
        out.push_str(&format!("{} {} {} {}", f.x, f.y, f.scale, f.orientation));
        if let Some(descs) = descriptors {
            for b in &descs[i].bins {
                out.push_str(&format!(" {b}"));
            }
        }
        out.push('\n');
    }
    out
}

pub fn read_pgm(path: &Path) -> Result<Image, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    pgm::parse_pgm(&bytes).map_err(|m| DatasetError::malformed(path, m))
}

pub fn write_pgm(path: &Path, image: &Image) -> Result<(), DatasetError> {
    fs::write(path, pgm::format_pgm(image)).map_err(|e| DatasetError::io(path, e))
}

pub fn read_homography(path: &Path) -> Result<Homography, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_homography(&text).map_err(|m| DatasetError::malformed(path, m))
}

pub fn read_frames(
    path: &Path,
    expected_descriptor_len: Option<usize>,
) -> Result<FrameFile, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_frames(&text, expected_descriptor_len).map_err(|m| DatasetError::malformed(path, m))
}

pub fn write_frames(
    path: &Path,
    frames: &[FeatureFrame],
    descriptors: Option<&[NormalizedDescriptor]>,
) -> Result<(), DatasetError> {
    fs::write(path, format_frames(frames, descriptors)).map_err(|e| DatasetError::io(path, e))
}

/// One Oxford-layout category: six images and the five homographies
/// mapping image 1 onto images 2..6.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub images: Vec<Image>,
    pub homographies: Vec<Homography>,
}

pub const SEQUENCE_IMAGE_COUNT: usize = 6;

/// Loads `img1..img6.pgm` and `H1to2p..H1to6p` from a category directory.
pub fn load_sequence(dir: &Path) -> Result<Sequence, DatasetError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let mut images = Vec::with_capacity(SEQUENCE_IMAGE_COUNT);
    for k in 1..=SEQUENCE_IMAGE_COUNT {
        images.push(read_pgm(&dir.join(format!("img{k}.pgm")))?);
    }
    let mut homographies = Vec::with_capacity(SEQUENCE_IMAGE_COUNT - 1);
    for k in 2..=SEQUENCE_IMAGE_COUNT {
        homographies.push(read_homography(&dir.join(format!("H1to{k}p")))?);
    }
    Ok(Sequence { name, images, homographies })
}

/// The frame file expected next to image k (1-based) of a sequence.
pub fn frame_file_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("img{k}.frames"))
}

/// Category directories under an Oxford-layout root: subdirectories
/// holding an `img1.pgm`, in name order.
pub fn discover_categories(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let entries = fs::read_dir(root).map_err(|e| DatasetError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| DatasetError::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join("img1.pgm").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Samples the square normalized patch of a frame: the patch spans
/// [−λ, λ]² in its own coordinates, mapped into the image by rotating
/// with the frame orientation and scaling so that λ corresponds to
/// `magnification · frame.scale` pixels. Bilinear sampling with edge
/// replication.
///
/// Returns `None` (the skip signal) when the measurement circle of radius
/// magnification · scale is not fully inside the image.
pub fn extract_patch(
    image: &Image,
    frame: &FeatureFrame,
    grid: &HistogramGrid,
    magnification: f64,
) -> Option<Patch> {
    let radius = magnification * frame.scale;
    let max_x = (image.width - 1) as f64;
    let max_y = (image.height - 1) as f64;
    if frame.x - radius < 0.0
        || frame.x + radius > max_x
        || frame.y - radius < 0.0
        || frame.y + radius > max_y
    {
        return None;
    }
    let side = grid.patch_side();
    let half = (side as f64 - 1.0) / 2.0;
    let step = radius / grid.lambda_patch;
    let (sin, cos) = frame.orientation.sin_cos();
    let mut data = Vec::with_capacity(side * side);
    for r in 0..side {
        let v = r as f64 - half;
        for c in 0..side {
            let u = c as f64 - half;
            let x = frame.x + step * (cos * u - sin * v);
            let y = frame.y + step * (sin * u + cos * v);
            data.push(image.sample_bilinear(x, y));
        }
    }
    Patch::new(side, data).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ramp_image(side: usize) -> Image {
        let data = (0..side * side)
            .map(|i| ((i % side) + side * (i / side)) as f64 / (side * side) as f64)
            .collect();
        Image::new(side, side, data).unwrap()
    }

    #[test]
    fn homography_text_round_trip() {
        let h = parse_homography("1 0 0\n0 1 0\n0 0 1\n").unwrap();
        assert_eq!(h, Homography::identity());
        let h = parse_homography("2 0 0  0 2 0  0 0 2").unwrap();
        assert_eq!(h, Homography::identity());
        assert!(parse_homography("1 0 0 0 1 0 0 0").is_err());
        assert!(parse_homography("1 0 0 0 1 0 0 0 1 0").is_err());
        assert!(parse_homography("1 0 0 0 1 0 0 0 pear").is_err());
        assert!(parse_homography("1 0 0 2 0 0 0 0 1").is_err());
    }

    #[test]
    fn frame_file_parsing() {
        let f = parse_frames("10 20 3 0.5\n", None).unwrap();
        assert_eq!(f.frames.len(), 1);
        assert!(f.descriptors.is_none());
        assert_eq!(f.frames[0].x, 10.0);

        assert!(parse_frames("", None).unwrap().frames.is_empty());

        let f = parse_frames("1 2 3 0 0.6 0.8\n4 5 6 0 1 0\n", Some(2)).unwrap();
        assert_eq!(f.frames.len(), 2);
        let d = f.descriptors.unwrap();
        assert_eq!(d[0].bins, vec![0.6, 0.8]);
        assert_eq!(d[1].bins, vec![1.0, 0.0]);

        assert!(parse_frames("1 2 3 0 1 0\n", Some(128)).is_err());
        assert!(parse_frames("1 2 3 0\n1 2 3 0 9 9\n", None).is_err());
        assert!(parse_frames("1 2 3\n", None).is_err());
        assert!(parse_frames("1 2 -3 0\n", None).is_err());
    }

    #[test]
    fn descriptors_renormalize_on_load_only_when_drifted() {
        // Norm 5: gets renormalized. All-zero: kept as a sentinel.
        let f = parse_frames("0 0 1 0 3 4\n0 0 1 0 0 0\n", Some(2)).unwrap();
        let d = f.descriptors.unwrap();
        assert_eq!(d[0].bins, vec![0.6, 0.8]);
        assert!(d[1].is_sentinel());
    }

    #[test]
    fn frames_and_descriptors_round_trip_bit_exactly() {
        let frames = vec![
            FeatureFrame::new(10.125, 20.0625, 3.3333333333333335, 0.1).unwrap(),
            FeatureFrame::new(-4.0, 7.0, 2.0, 6.1).unwrap(),
        ];
        let descriptors = vec![
            NormalizedDescriptor { bins: vec![std::f64::consts::FRAC_1_SQRT_2; 2] },
            NormalizedDescriptor { bins: vec![1.0, 0.0] },
        ];
        let text = format_frames(&frames, Some(&descriptors));
        let parsed = parse_frames(&text, Some(2)).unwrap();
        assert_eq!(parsed.frames, frames);
        assert_eq!(parsed.descriptors.unwrap(), descriptors);
    }

    #[test]
    fn bilinear_sampling_replicates_edges() {
        let img = Image::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.5, 0.5), 0.5);
        assert_eq!(img.sample_bilinear(-5.0, 0.0), 0.0);
        assert_eq!(img.sample_bilinear(9.0, 9.0), 1.0);
        assert_eq!(img.sample_bilinear(0.25, 0.0), 0.25);
    }

    #[test]
    fn patch_extraction_is_an_exact_crop_at_unit_ratio() {
        let grid = HistogramGrid::default();
        let img = ramp_image(64);
        // step = magnification·scale/λ = 1, orientation 0, centered on the
        // half-integer grid so samples land on pixel centers.
        let frame = FeatureFrame::new(31.5, 20.5, 4.0, 0.0).unwrap();
        let patch = extract_patch(&img, &frame, &grid, 3.0).unwrap();
        assert_eq!(patch.side, 24);
        for r in 0..24 {
            for c in 0..24 {
                assert_eq!(patch.data[r * 24 + c], img.at(20 + c, 9 + r), "r={r} c={c}");
            }
        }
    }

    #[test]
    fn patch_at_half_turn_is_the_rotated_crop() {
        let grid = HistogramGrid::default();
        let img = ramp_image(64);
        let upright = FeatureFrame::new(31.5, 20.5, 4.0, 0.0).unwrap();
        let flipped = FeatureFrame::new(31.5, 20.5, 4.0, PI).unwrap();
        let a = extract_patch(&img, &upright, &grid, 3.0).unwrap();
        let b = extract_patch(&img, &flipped, &grid, 3.0).unwrap();
        for r in 0..24 {
            for c in 0..24 {
                let got = b.data[r * 24 + c];
                let want = a.data[(23 - r) * 24 + (23 - c)];
                assert!((got - want).abs() < 1e-12, "r={r} c={c}");
            }
        }
    }

    #[test]
    fn border_frames_are_skipped() {
        let grid = HistogramGrid::default();
        let img = ramp_image(64);
        assert!(extract_patch(
            &img,
            &FeatureFrame::new(0.0, 0.0, 4.0, 0.0).unwrap(),
            &grid,
            3.0
        )
        .is_none());
        assert!(extract_patch(
            &img,
            &FeatureFrame::new(55.0, 32.0, 4.0, 0.0).unwrap(),
            &grid,
            3.0
        )
        .is_none());
        assert!(extract_patch(
            &img,
            &FeatureFrame::new(32.0, 32.0, 4.0, 0.0).unwrap(),
            &grid,
            3.0
        )
        .is_some());
    }
}
