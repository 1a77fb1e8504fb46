//! Gradient-orientation histogram descriptors over a 3-D bin grid, and the
//! clamping policies that bound individual bins before normalization.
//!
//! A descriptor accumulates, for every pixel of a square patch, the gradient
//! magnitude weighted by a Gaussian window and by tent (linear interpolation)
//! weights in x, y, and orientation. Each sample therefore touches at most
//! 2×2×2 bins. Clamping either caps normalized bins at a fixed constant
//! (`Lowe`) or caps raw bins at the a contrario threshold for the
//! descriptor's own sample mass (`MeaningfulExact` / `MeaningfulApprox`).

use crate::acontrario::{
    approx_threshold, exact_threshold, AContrarioConfig, AContrarioError,
};
use std::f64::consts::{PI, TAU};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("grid dimensions must be positive, got {0}x{1}x{2}")]
    BadGridDims(usize, usize, usize),
    #[error("grid geometry must be positive and finite: lambda={0}, sigma={1}")]
    BadGridGeometry(f64, f64),
    #[error("grid spec must look like 4x4x8, got {0:?}")]
    BadGridSpec(String),
    #[error("patch data length {got} does not match side {side}")]
    BadPatchLength { side: usize, got: usize },
    #[error("patch side must be at least 2, got {0}")]
    PatchTooSmall(usize),
    #[error("descriptor has {got} bins but the grid defines {want}")]
    GridMismatch { want: usize, got: usize },
    #[error("clamp constant must be positive and finite, got {0}")]
    BadClampConstant(f64),
    #[error(transparent)]
    Stats(#[from] AContrarioError),
}

/// Geometry of the histogram: n_x × n_y spatial cells, n_theta orientation
/// cells, over a square patch spanning [−λ, λ]² with Gaussian window σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramGrid {
    pub n_x: usize,
    pub n_y: usize,
    pub n_theta: usize,
    pub lambda_patch: f64,
    pub sigma: f64,
}

impl Default for HistogramGrid {
    fn default() -> Self {
        Self { n_x: 4, n_y: 4, n_theta: 8, lambda_patch: 12.0, sigma: 12.0 }
    }
}

impl HistogramGrid {
    pub fn new(
        n_x: usize,
        n_y: usize,
        n_theta: usize,
        lambda_patch: f64,
        sigma: f64,
    ) -> Result<Self, DescriptorError> {
        if n_x == 0 || n_y == 0 || n_theta == 0 {
            return Err(DescriptorError::BadGridDims(n_x, n_y, n_theta));
        }
        if !(lambda_patch.is_finite() && lambda_patch > 0.0 && sigma.is_finite() && sigma > 0.0) {
            return Err(DescriptorError::BadGridGeometry(lambda_patch, sigma));
        }
        Ok(Self { n_x, n_y, n_theta, lambda_patch, sigma })
    }

    /// Total bin count L.
    pub fn bin_count(&self) -> usize {
        self.n_x * self.n_y * self.n_theta
    }

    /// Uniform per-bin probability 1/L of the noise model.
    pub fn bin_probability(&self) -> f64 {
        1.0 / self.bin_count() as f64
    }

    /// Pixel side of the sampled patch: the grid spans [−λ, λ] at unit
    /// sampling, i.e. 2λ pixels.
    pub fn patch_side(&self) -> usize {
        (2.0 * self.lambda_patch).round() as usize
    }

    /// Flat index of bin (ix, iy, it): x-major, then y, then orientation.
    pub fn bin_index(&self, ix: usize, iy: usize, it: usize) -> usize {
        debug_assert!(ix < self.n_x && iy < self.n_y && it < self.n_theta);
        (ix * self.n_y + iy) * self.n_theta + it
    }

    /// Center of spatial x-bin i in patch coordinates.
    pub fn x_bin_center(&self, i: usize) -> f64 {
        -self.lambda_patch + (i as f64 + 0.5) * 2.0 * self.lambda_patch / self.n_x as f64
    }

    /// Center of spatial y-bin j in patch coordinates.
    pub fn y_bin_center(&self, j: usize) -> f64 {
        -self.lambda_patch + (j as f64 + 0.5) * 2.0 * self.lambda_patch / self.n_y as f64
    }

    /// Center angle of orientation bin k.
    pub fn theta_bin_center(&self, k: usize) -> f64 {
        TAU * k as f64 / self.n_theta as f64
    }
}

impl FromStr for HistogramGrid {
    type Err = DescriptorError;

    /// Parses "NXxNYxNT" (e.g. "4x4x8") with the default patch geometry.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('x').collect();
        if parts.len() != 3 {
            return Err(DescriptorError::BadGridSpec(s.to_string()));
        }
        let mut dims = [0usize; 3];
        for (d, part) in dims.iter_mut().zip(&parts) {
            *d = part
                .parse::<usize>()
                .map_err(|_| DescriptorError::BadGridSpec(s.to_string()))?;
        }
        let default = Self::default();
        Self::new(dims[0], dims[1], dims[2], default.lambda_patch, default.sigma)
    }
}

/// Square grayscale patch, row-major, intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub side: usize,
    pub data: Vec<f64>,
}

impl Patch {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self, DescriptorError> {
        if side < 2 {
            return Err(DescriptorError::PatchTooSmall(side));
        }
        if data.len() != side * side {
            return Err(DescriptorError::BadPatchLength { side, got: data.len() });
        }
        Ok(Self { side, data })
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.side + c]
    }
}

/// Per-pixel gradient magnitude and orientation (orientation in [0, 2π)).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub side: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

/// Raw (pre-normalization) descriptor bins plus their total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDescriptor {
    pub bins: Vec<f64>,
    pub mass: f64,
}

impl RawDescriptor {
    pub fn new(bins: Vec<f64>) -> Self {
        let mass = bins.iter().sum();
        Self { bins, mass }
    }
}

/// Unit-norm descriptor; all-zero is the sentinel for "no gradient mass"
/// and matches nothing (its distances are treated as infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDescriptor {
    pub bins: Vec<f64>,
}

impl NormalizedDescriptor {
    pub fn is_sentinel(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }
}

/// Bin-bounding policy applied before the final normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampPolicy {
    /// Plain normalization, no cap.
    None,
    /// Cap normalized bins at c, then renormalize.
    Lowe { c: f64 },
    /// Cap raw bins at the exact a contrario threshold for the descriptor's
    /// mass, then normalize.
    MeaningfulExact,
    /// Same with the closed-form threshold.
    MeaningfulApprox,
}

impl ClampPolicy {
    /// Stable identifier used by the CLI and in reports.
    pub fn label(&self) -> &'static str {
        match self {
            ClampPolicy::None => "none",
            ClampPolicy::Lowe { .. } => "lowe",
            ClampPolicy::MeaningfulExact => "mc-exact",
            ClampPolicy::MeaningfulApprox => "mc-approx",
        }
    }
}

/// Spatial tent weight: max(0, 1 − n_z·|z|/(2λ)). Reaches zero exactly one
/// bin width (2λ/n_z) away from the bin center.
pub fn spatial_weight(z: f64, n_z: usize, lambda: f64) -> f64 {
    (1.0 - n_z as f64 * z.abs() / (2.0 * lambda)).max(0.0)
}

/// Angular tent weight: max(0, 1 − n_θ·d(θ, θ_k)/2π) with d the circular
/// distance folded into [0, π].
pub fn angular_weight(theta: f64, theta_k: f64, n_theta: usize) -> f64 {
    let mut d = (theta - theta_k).rem_euclid(TAU);
    if d > PI {
        d = TAU - d;
    }
    (1.0 - n_theta as f64 * d / TAU).max(0.0)
}

/// Finite-difference gradients: central differences inside, one-sided at
/// the borders. Orientation is atan2 folded into [0, 2π).
pub fn gradient_field(patch: &Patch) -> GradientField {
    let s = patch.side;
    let mut magnitude = vec![0.0; s * s];
    let mut orientation = vec![0.0; s * s];
    for r in 0..s {
        for c in 0..s {
            let dx = if c == 0 {
                patch.at(r, 1) - patch.at(r, 0)
            } else if c == s - 1 {
                patch.at(r, s - 1) - patch.at(r, s - 2)
            } else {
                (patch.at(r, c + 1) - patch.at(r, c - 1)) / 2.0
            };
            let dy = if r == 0 {
                patch.at(1, c) - patch.at(0, c)
            } else if r == s - 1 {
                patch.at(s - 1, c) - patch.at(s - 2, c)
            } else {
                (patch.at(r + 1, c) - patch.at(r - 1, c)) / 2.0
            };
            let idx = r * s + c;
            magnitude[idx] = dx.hypot(dy);
            let mut theta = dy.atan2(dx);
            if theta < 0.0 {
                theta += TAU;
            }
            if theta >= TAU {
                theta = 0.0;
            }
            orientation[idx] = theta;
        }
    }
    GradientField { side: s, magnitude, orientation }
}

/// Accumulate the weighted gradient histogram of one patch.
///
/// Pixel (r, c) sits at patch coordinates (c − (side−1)/2, r − (side−1)/2)
/// and contributes g_σ · ‖∇J‖ · (x tent) · (y tent) · (θ tent) to the at
/// most 2×2×2 bins whose tents overlap it. Mass that falls outside the
/// spatial grid near the patch border is dropped, as the tent support
/// dictates.
pub fn build_descriptor(patch: &Patch, grid: &HistogramGrid) -> RawDescriptor {
    let field = gradient_field(patch);
    build_descriptor_from_field(&field, grid)
}

/// Same as [`build_descriptor`] for a precomputed gradient field.
pub fn build_descriptor_from_field(field: &GradientField, grid: &HistogramGrid) -> RawDescriptor {
    let s = field.side;
    let half = (s as f64 - 1.0) / 2.0;
    let lambda = grid.lambda_patch;
    let two_sigma_sq = 2.0 * grid.sigma * grid.sigma;
    let bw_x = 2.0 * lambda / grid.n_x as f64;
    let bw_y = 2.0 * lambda / grid.n_y as f64;
    let mut bins = vec![0.0; grid.bin_count()];
    for r in 0..s {
        for c in 0..s {
            let idx = r * s + c;
            let mag = field.magnitude[idx];
            if mag == 0.0 {
                continue;
            }
            let u = c as f64 - half;
            let v = r as f64 - half;
            let g = (-(u * u + v * v) / two_sigma_sq).exp();
            let w = g * mag;

            // Fractional bin coordinates: value i means "exactly at the
            // center of bin i", so the two tents covering the sample are
            // floor and floor+1 with weights (1−f, f).
            let fx = (u + lambda) / bw_x - 0.5;
            let fy = (v + lambda) / bw_y - 0.5;
            let ft = field.orientation[idx] / TAU * grid.n_theta as f64;

            let ix0 = fx.floor();
            let iy0 = fy.floor();
            let it0 = ft.floor();
            let rx = fx - ix0;
            let ry = fy - iy0;
            let rt = ft - it0;

            for (dx, wx) in [(0i64, 1.0 - rx), (1, rx)] {
                let ix = ix0 as i64 + dx;
                if ix < 0 || ix >= grid.n_x as i64 || wx == 0.0 {
                    continue;
                }
                for (dy, wy) in [(0i64, 1.0 - ry), (1, ry)] {
                    let iy = iy0 as i64 + dy;
                    if iy < 0 || iy >= grid.n_y as i64 || wy == 0.0 {
                        continue;
                    }
                    for (dt, wt) in [(0i64, 1.0 - rt), (1, rt)] {
                        if wt == 0.0 {
                            continue;
                        }
                        let it = (it0 as i64 + dt).rem_euclid(grid.n_theta as i64);
                        bins[grid.bin_index(ix as usize, iy as usize, it as usize)] +=
                            w * wx * wy * wt;
                    }
                }
            }
        }
    }
    RawDescriptor::new(bins)
}

/// L2-normalize. A zero-mass descriptor becomes the all-zero sentinel.
pub fn normalize(raw: &RawDescriptor) -> NormalizedDescriptor {
    let norm = raw.bins.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm == 0.0 {
        return NormalizedDescriptor { bins: vec![0.0; raw.bins.len()] };
    }
    NormalizedDescriptor { bins: raw.bins.iter().map(|b| b / norm).collect() }
}

/// Apply a clamping policy and normalize.
///
/// `Lowe` caps bins of the normalized descriptor at c and renormalizes.
/// The meaningful policies cap raw bins at the a contrario threshold
/// computed from the descriptor's own mass M, the grid's 1/L bin
/// probability, and the test count resolved from `cfg`, then normalize.
pub fn clamp(
    raw: &RawDescriptor,
    policy: ClampPolicy,
    cfg: &AContrarioConfig,
    grid: &HistogramGrid,
) -> Result<NormalizedDescriptor, DescriptorError> {
    if raw.bins.len() != grid.bin_count() {
        return Err(DescriptorError::GridMismatch {
            want: grid.bin_count(),
            got: raw.bins.len(),
        });
    }
    match policy {
        ClampPolicy::None => Ok(normalize(raw)),
        ClampPolicy::Lowe { c } => {
            if !(c.is_finite() && c > 0.0) {
                return Err(DescriptorError::BadClampConstant(c));
            }
            let normalized = normalize(raw);
            if normalized.is_sentinel() {
                return Ok(normalized);
            }
            let capped =
                RawDescriptor::new(normalized.bins.iter().map(|&b| b.min(c)).collect());
            Ok(normalize(&capped))
        }
        ClampPolicy::MeaningfulExact | ClampPolicy::MeaningfulApprox => {
            if raw.mass == 0.0 {
                return Ok(normalize(raw));
            }
            let t = meaningful_threshold(policy, raw.mass, cfg, grid)?
                .expect("meaningful policies always produce a threshold");
            let capped = RawDescriptor::new(raw.bins.iter().map(|&b| b.min(t)).collect());
            Ok(normalize(&capped))
        }
    }
}

/// The raw-domain cap a meaningful policy would apply to a descriptor of
/// the given mass; `None` for policies without a raw-domain threshold.
pub fn meaningful_threshold(
    policy: ClampPolicy,
    mass: f64,
    cfg: &AContrarioConfig,
    grid: &HistogramGrid,
) -> Result<Option<f64>, DescriptorError> {
    let tests = cfg.resolve_tests(grid);
    let p = grid.bin_probability();
    match policy {
        ClampPolicy::None | ClampPolicy::Lowe { .. } => Ok(None),
        ClampPolicy::MeaningfulExact => {
            Ok(Some(exact_threshold(cfg, tests, mass, p)?.value as f64))
        }
        ClampPolicy::MeaningfulApprox => Ok(Some(approx_threshold(tests, mass, p)?)),
    }
}
