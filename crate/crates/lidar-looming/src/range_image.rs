//! Spherical range-image grids: projection of unordered point clouds and
//! grid conditioning (gap interpolation, decimation).
//!
//! A grid discretizes azimuth θ (columns) and elevation φ (rows). Both
//! spans are half-open: an angle maps to the cell found by flooring
//! `(angle − min) / step`, and `max` itself is outside the grid. Cells
//! that received no return are EMPTY; emptiness is an explicit mask, not
//! a sentinel range value.

use std::fmt;

use crate::geometry::{cart_to_spherical, spherical_to_cart, SphericalCoord, Vec3};

/// Sensor range cap in meters. Points and ray hits beyond this are
/// treated as misses.
pub const DEFAULT_R_MAX: f64 = 120.0;

/// Default grid width (azimuth columns). Half the native column count of
/// a 0.09°-resolution scanner: coarser cells make consecutive scans of
/// the same surface land in the same cell more often.
pub const DEFAULT_WIDTH: usize = 2000;

/// Default grid height (elevation rows), one per beam of a 64-beam unit.
pub const DEFAULT_HEIGHT: usize = 64;

/// Default elevation span in degrees. The 26.8° total vertical field of
/// view is split −24.8° below the horizon, +2.0° above; the split is an
/// assumption and is configurable per dataset.
pub const DEFAULT_PHI_MIN_DEG: f64 = -24.8;
pub const DEFAULT_PHI_MAX_DEG: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridError {
    InvalidSpec(&'static str),
    NonDividingFactor { factor: usize, extent: usize },
    OutOfSpan,
    InvalidData(String),
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::InvalidSpec(msg) => write!(f, "invalid grid spec: {msg}"),
            GridError::NonDividingFactor { factor, extent } => {
                write!(
                    f,
                    "decimation factor {factor} does not divide extent {extent}"
                )
            }
            GridError::OutOfSpan => write!(f, "angle outside the grid span"),
            GridError::InvalidData(msg) => write!(f, "invalid grid data: {msg}"),
        }
    }
}

impl std::error::Error for GridError {}

/// Geometry of a range-image grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl GridSpec {
    pub fn new(
        width: usize,
        height: usize,
        theta_min: f64,
        theta_max: f64,
        phi_min: f64,
        phi_max: f64,
    ) -> Result<Self, GridError> {
        if width < 2 || height < 2 {
            return Err(GridError::InvalidSpec("grid must be at least 2x2"));
        }
        if theta_max <= theta_min || phi_max <= phi_min {
            return Err(GridError::InvalidSpec("angular bounds must be increasing"));
        }
        if ![theta_min, theta_max, phi_min, phi_max]
            .iter()
            .all(|a| a.is_finite())
        {
            return Err(GridError::InvalidSpec("angular bounds must be finite"));
        }
        Ok(GridSpec {
            width,
            height,
            theta_min,
            theta_max,
            phi_min,
            phi_max,
        })
    }

    /// Full 360° azimuth and the default elevation span at the given
    /// resolution.
    pub fn with_dims(width: usize, height: usize) -> Result<Self, GridError> {
        GridSpec::new(
            width,
            height,
            -std::f64::consts::PI,
            std::f64::consts::PI,
            DEFAULT_PHI_MIN_DEG.to_radians(),
            DEFAULT_PHI_MAX_DEG.to_radians(),
        )
    }

    pub fn theta_step(&self) -> f64 {
        (self.theta_max - self.theta_min) / self.width as f64
    }

    pub fn phi_step(&self) -> f64 {
        (self.phi_max - self.phi_min) / self.height as f64
    }

    /// Column containing `theta`, or None outside [theta_min, theta_max).
    pub fn theta_index(&self, theta: f64) -> Option<usize> {
        if !theta.is_finite() || theta < self.theta_min {
            return None;
        }
        let col = ((theta - self.theta_min) / self.theta_step()).floor() as usize;
        (col < self.width).then_some(col)
    }

    /// Row containing `phi`, or None outside [phi_min, phi_max).
    pub fn phi_index(&self, phi: f64) -> Option<usize> {
        if !phi.is_finite() || phi < self.phi_min {
            return None;
        }
        let row = ((phi - self.phi_min) / self.phi_step()).floor() as usize;
        (row < self.height).then_some(row)
    }

    /// Flat index of cell (col, row); rows are elevation-major.
    pub fn cell_index(&self, col: usize, row: usize) -> usize {
        debug_assert!(col < self.width && row < self.height);
        row * self.width + col
    }

    /// Angles at the center of cell (col, row).
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.theta_min + (col as f64 + 0.5) * self.theta_step(),
            self.phi_min + (row as f64 + 0.5) * self.phi_step(),
        )
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::with_dims(DEFAULT_WIDTH, DEFAULT_HEIGHT).expect("default spec is valid")
    }
}

/// One LiDAR sweep discretized on a [`GridSpec`]. VALID cells hold a
/// range in meters (> 0); EMPTY cells hold nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    spec: GridSpec,
    values: Vec<f64>,
    valid: Vec<bool>,
    pub timestamp: f64,
}

impl RangeImage {
    pub fn empty(spec: GridSpec, timestamp: f64) -> Self {
        RangeImage {
            spec,
            values: vec![0.0; spec.len()],
            valid: vec![false; spec.len()],
            timestamp,
        }
    }

    /// Rebuild an image from raw storage (grid file readers).
    pub fn from_raw(
        spec: GridSpec,
        values: Vec<f64>,
        valid: Vec<bool>,
        timestamp: f64,
    ) -> Result<Self, GridError> {
        if values.len() != spec.len() || valid.len() != spec.len() {
            return Err(GridError::InvalidData(format!(
                "expected {} cells, got {} values / {} mask entries",
                spec.len(),
                values.len(),
                valid.len()
            )));
        }
        for (i, (&v, &ok)) in values.iter().zip(&valid).enumerate() {
            if ok && !(v > 0.0 && v.is_finite()) {
                return Err(GridError::InvalidData(format!(
                    "cell {i} marked valid but holds non-positive range {v}"
                )));
            }
        }
        Ok(RangeImage {
            spec,
            values,
            valid,
            timestamp,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        let i = self.spec.cell_index(col, row);
        self.valid[i].then(|| self.values[i])
    }

    pub fn set(&mut self, col: usize, row: usize, range: f64) {
        debug_assert!(range > 0.0 && range.is_finite());
        let i = self.spec.cell_index(col, row);
        self.values[i] = range;
        self.valid[i] = true;
    }

    pub fn clear_cell(&mut self, col: usize, row: usize) {
        let i = self.spec.cell_index(col, row);
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    /// Iterate over VALID cells as (col, row, range).
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.spec.width;
        self.valid
            .iter()
            .enumerate()
            .filter(|&(_, &ok)| ok)
            .map(move |(i, _)| (i % w, i / w, self.values[i]))
    }

    /// One point per VALID cell, placed at the cell center direction at
    /// the stored range.
    pub fn to_point_cloud(&self) -> PointCloud {
        let points = self
            .iter_valid()
            .map(|(col, row, r)| {
                let (theta, phi) = self.spec.cell_center(col, row);
                spherical_to_cart(SphericalCoord { r, theta, phi })
            })
            .collect();
        PointCloud {
            points,
            intensities: None,
            timestamp: self.timestamp,
        }
    }
}

/// Unordered LiDAR return set in the sensor frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Per-point reflectance in [0, 1], when the source provides it.
    pub intensities: Option<Vec<f32>>,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec3>, timestamp: f64) -> Self {
        PointCloud {
            points,
            intensities: None,
            timestamp,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How multiple points falling into one cell are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellReduction {
    /// Keep the nearest return; the closest surface dominates threat.
    #[default]
    Min,
    /// Average the returns (experimental).
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectOptions {
    pub r_max: f64,
    pub reduction: CellReduction,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions {
            r_max: DEFAULT_R_MAX,
            reduction: CellReduction::Min,
        }
    }
}

/// Where every input point went. `binned + dropped_* = total points`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProjectStats {
    pub binned: usize,
    pub dropped_out_of_fov: usize,
    pub dropped_beyond_range: usize,
    pub dropped_at_origin: usize,
}

impl ProjectStats {
    pub fn total(&self) -> usize {
        self.binned + self.dropped_out_of_fov + self.dropped_beyond_range + self.dropped_at_origin
    }
}

/// Project a point cloud onto a grid with default options (min-range
/// reduction, 120 m cap).
pub fn project(cloud: &PointCloud, spec: GridSpec) -> RangeImage {
    project_with(cloud, spec, ProjectOptions::default()).0
}

/// Project a point cloud onto a grid.
///
/// Each point maps to the cell containing its (θ, φ). Points at the
/// origin, outside the angular span, or beyond `r_max` are dropped and
/// counted. Untouched cells stay EMPTY.
pub fn project_with(
    cloud: &PointCloud,
    spec: GridSpec,
    opts: ProjectOptions,
) -> (RangeImage, ProjectStats) {
    let mut img = RangeImage::empty(spec, cloud.timestamp);
    let mut stats = ProjectStats::default();
    let mut sums = Vec::new();
    let mut counts = Vec::new();
    if opts.reduction == CellReduction::Mean {
        sums = vec![0.0f64; spec.len()];
        counts = vec![0usize; spec.len()];
    }

    for p in &cloud.points {
        if p.norm_squared() == 0.0 {
            stats.dropped_at_origin += 1;
            continue;
        }
        let s = cart_to_spherical(*p);
        let (col, row) = match (spec.theta_index(s.theta), spec.phi_index(s.phi)) {
            (Some(c), Some(r)) => (c, r),
            _ => {
                stats.dropped_out_of_fov += 1;
                continue;
            }
        };
        if s.r > opts.r_max {
            stats.dropped_beyond_range += 1;
            continue;
        }
        stats.binned += 1;
        match opts.reduction {
            CellReduction::Min => match img.get(col, row) {
                Some(existing) if existing <= s.r => {}
                _ => img.set(col, row, s.r),
            },
            CellReduction::Mean => {
                let i = spec.cell_index(col, row);
                sums[i] += s.r;
                counts[i] += 1;
            }
        }
    }

    if opts.reduction == CellReduction::Mean {
        for row in 0..spec.height {
            for col in 0..spec.width {
                let i = spec.cell_index(col, row);
                if counts[i] > 0 {
                    img.set(col, row, sums[i] / counts[i] as f64);
                }
            }
        }
    }

    (img, stats)
}

/// Fill short EMPTY runs along each θ-row by linear interpolation in
/// range. A run is filled only when it is at most `max_gap` cells long
/// and flanked by VALID cells on both sides. VALID cells are never
/// modified, and rows never interpolate across the elevation axis:
/// beams are physically separate lasers.
pub fn fill_gaps(img: &RangeImage, max_gap: usize) -> RangeImage {
    let mut out = img.clone();
    if max_gap == 0 {
        return out;
    }
    let spec = *img.spec();
    for row in 0..spec.height {
        let mut prev_valid: Option<usize> = None;
        for col in 0..spec.width {
            if img.get(col, row).is_none() {
                continue;
            }
            if let Some(left) = prev_valid {
                let gap = col - left - 1;
                if gap >= 1 && gap <= max_gap {
                    let a = img.get(left, row).unwrap();
                    let b = img.get(col, row).unwrap();
                    let steps = (col - left) as f64;
                    for k in 1..=gap {
                        let r = a + (b - a) * (k as f64 / steps);
                        out.set(left + k, row, r);
                    }
                }
            }
            prev_valid = Some(col);
        }
    }
    out
}

/// Shrink a grid by integer factors along each axis. Every output cell
/// is the minimum VALID range of its block, or EMPTY if the whole block
/// is EMPTY. The factors must divide the grid dimensions.
pub fn decimate(
    img: &RangeImage,
    factor_theta: usize,
    factor_phi: usize,
) -> Result<RangeImage, GridError> {
    let spec = *img.spec();
    if factor_theta == 0 || !spec.width.is_multiple_of(factor_theta) {
        return Err(GridError::NonDividingFactor {
            factor: factor_theta,
            extent: spec.width,
        });
    }
    if factor_phi == 0 || !spec.height.is_multiple_of(factor_phi) {
        return Err(GridError::NonDividingFactor {
            factor: factor_phi,
            extent: spec.height,
        });
    }
    if factor_theta == 1 && factor_phi == 1 {
        return Ok(img.clone());
    }
    let out_spec = GridSpec::new(
        spec.width / factor_theta,
        spec.height / factor_phi,
        spec.theta_min,
        spec.theta_max,
        spec.phi_min,
        spec.phi_max,
    )?;
    let mut out = RangeImage::empty(out_spec, img.timestamp);
    for row in 0..out_spec.height {
        for col in 0..out_spec.width {
            let mut best: Option<f64> = None;
            for dr in 0..factor_phi {
                for dc in 0..factor_theta {
                    if let Some(r) = img.get(col * factor_theta + dc, row * factor_phi + dr) {
                        best = Some(match best {
                            Some(b) if b <= r => b,
                            _ => r,
                        });
                    }
                }
            }
            if let Some(r) = best {
                out.set(col, row, r);
            }
        }
    }
    Ok(out)
}

/// Nearest-cell lookup. Returns the cell's range, `None` for an EMPTY
/// cell, or an error outside the grid span. Boundary angles resolve by
/// the floor convention.
pub fn sample(img: &RangeImage, theta: f64, phi: f64) -> Result<Option<f64>, GridError> {
    let spec = img.spec();
    let col = spec.theta_index(theta).ok_or(GridError::OutOfSpan)?;
    let row = spec.phi_index(phi).ok_or(GridError::OutOfSpan)?;
    Ok(img.get(col, row))
}
