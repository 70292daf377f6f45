//! Looming maps from range-image pairs or from per-point range plus ego
//! velocity, threat-zone classification, and equal-looming sphere
//! geometry.
//!
//! Sign convention: a cell whose range shrinks over time has positive
//! looming. Map values are clamped to ±`l_max` and the number of clamped
//! cells is kept on the map, so occlusion spikes stay renderable without
//! hiding how often they occurred.

use std::fmt;

use crate::geometry::{cart_to_spherical, looming_radial, Vec3};
use crate::range_image::{GridSpec, PointCloud, RangeImage, DEFAULT_R_MAX};

/// Default symmetric clamp for map values, s⁻¹.
pub const DEFAULT_CLAMP: f64 = 20.0;

/// Default range discontinuity that marks an occlusion edge, meters.
pub const DEFAULT_EDGE_JUMP: f64 = 1.0;

/// Default edge exclusion radius around a discontinuity, cells.
pub const DEFAULT_EDGE_RADIUS: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoomingError {
    /// The two inputs live on different grids.
    SpecMismatch,
    /// Thresholds must satisfy L3 > L2 > L1 > 0.
    UnorderedThresholds,
    /// A zero looming level has no finite sphere; the locus is the plane
    /// t·p = 0 through the origin.
    ZeroLevel,
    InvalidInput(&'static str),
}

impl fmt::Display for LoomingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoomingError::SpecMismatch => write!(f, "grid specs do not match"),
            LoomingError::UnorderedThresholds => {
                write!(f, "thresholds must satisfy L3 > L2 > L1 > 0")
            }
            LoomingError::ZeroLevel => {
                write!(
                    f,
                    "zero looming level has no finite sphere (locus is a plane)"
                )
            }
            LoomingError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for LoomingError {}

/// A grid of looming values in s⁻¹ with a validity mask.
///
/// `dt` is the scan separation for the grid method and 0 for the
/// instantaneous (velocity) method. `clamped` counts cells whose raw
/// value exceeded the clamp limit.
#[derive(Debug, Clone, PartialEq)]
pub struct LoomingMap {
    spec: GridSpec,
    values: Vec<f64>,
    valid: Vec<bool>,
    pub dt: f64,
    pub clamped: usize,
}

impl LoomingMap {
    pub fn empty(spec: GridSpec, dt: f64) -> Self {
        LoomingMap {
            spec,
            values: vec![0.0; spec.len()],
            valid: vec![false; spec.len()],
            dt,
            clamped: 0,
        }
    }

    pub fn from_raw(
        spec: GridSpec,
        values: Vec<f64>,
        valid: Vec<bool>,
        dt: f64,
    ) -> Result<Self, LoomingError> {
        if values.len() != spec.len() || valid.len() != spec.len() {
            return Err(LoomingError::InvalidInput("cell count does not match spec"));
        }
        for (&v, &ok) in values.iter().zip(&valid) {
            if ok && !v.is_finite() {
                return Err(LoomingError::InvalidInput(
                    "valid cell holds non-finite value",
                ));
            }
        }
        Ok(LoomingMap {
            spec,
            values,
            valid,
            dt,
            clamped: 0,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        let i = self.spec.cell_index(col, row);
        self.valid[i].then(|| self.values[i])
    }

    pub(crate) fn set_clamped(&mut self, i: usize, raw: f64, l_max: f64) {
        let v = if raw > l_max {
            self.clamped += 1;
            l_max
        } else if raw < -l_max {
            self.clamped += 1;
            -l_max
        } else {
            raw
        };
        self.values[i] = v;
        self.valid[i] = true;
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

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.spec.width;
        self.valid
            .iter()
            .enumerate()
            .filter(|&(_, &ok)| ok)
            .map(move |(i, _)| (i % w, i / w, self.values[i]))
    }
}

/// Ordinal threat level of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ThreatClass {
    None,
    Low,
    Medium,
    High,
}

/// Looming thresholds delimiting the threat zones, 0 < L1 < L2 < L3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreatThresholds {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl ThreatThresholds {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Result<Self, LoomingError> {
        if !(l1 > 0.0 && l2 > l1 && l3 > l2) || !l3.is_finite() {
            return Err(LoomingError::UnorderedThresholds);
        }
        Ok(ThreatThresholds { l1, l2, l3 })
    }

    /// High strictly above L3, Medium in (L2, L3], Low in (L1, L2],
    /// everything at or below L1 is None. A value exactly at a threshold
    /// falls in the lower class.
    pub fn classify(&self, l: f64) -> ThreatClass {
        if l > self.l3 {
            ThreatClass::High
        } else if l > self.l2 {
            ThreatClass::Medium
        } else if l > self.l1 {
            ThreatClass::Low
        } else {
            ThreatClass::None
        }
    }
}

/// Per-cell threat classes derived from a looming map.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreatMap {
    spec: GridSpec,
    classes: Vec<ThreatClass>,
    pub thresholds: ThreatThresholds,
}

impl ThreatMap {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn get(&self, col: usize, row: usize) -> ThreatClass {
        self.classes[self.spec.cell_index(col, row)]
    }

    pub fn classes(&self) -> &[ThreatClass] {
        &self.classes
    }

    /// Cell counts as [none, low, medium, high].
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for c in &self.classes {
            counts[*c as usize] += 1;
        }
        counts
    }
}

/// Sphere of constant looming for a given translation velocity. Passes
/// through the vehicle origin; its center lies on the translation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualLoomingSphere {
    pub center: Vec3,
    pub radius: f64,
    /// The looming value shared by every surface point, s⁻¹.
    pub level: f64,
}

/// Error statistics from comparing an estimated map against a reference.
/// `cells == 0` flags that the maps had no comparable cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub cells: usize,
    pub median_abs: f64,
    pub p90_abs: f64,
    /// Fraction of compared cells within 10% relative of the reference.
    pub frac_within_10pct: f64,
}

impl ErrorStats {
    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }
}

/// Cells to leave out of a map comparison because they sit next to a
/// range discontinuity, where occlusion makes consecutive scans sample
/// different surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    spec: GridSpec,
    excluded: Vec<bool>,
}

impl EdgeMask {
    /// Mark every cell within `radius` cells of a θ-neighbor range jump
    /// larger than `jump` meters. Jumps are only detected between two
    /// VALID cells; the elevation axis is not scanned.
    pub fn from_range_discontinuities(img: &RangeImage, jump: f64, radius: usize) -> EdgeMask {
        let spec = *img.spec();
        let mut excluded = vec![false; spec.len()];
        for row in 0..spec.height {
            for col in 0..spec.width.saturating_sub(1) {
                let (a, b) = (img.get(col, row), img.get(col + 1, row));
                if let (Some(a), Some(b)) = (a, b) {
                    if (b - a).abs() > jump {
                        let lo = col.saturating_sub(radius);
                        let hi = (col + 1 + radius).min(spec.width - 1);
                        for c in lo..=hi {
                            excluded[spec.cell_index(c, row)] = true;
                        }
                    }
                }
            }
        }
        EdgeMask { spec, excluded }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn is_excluded(&self, col: usize, row: usize) -> bool {
        self.excluded[self.spec.cell_index(col, row)]
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }
}

/// Looming from two consecutive range images with the default clamp.
pub fn loom_from_grids(
    prev: &RangeImage,
    curr: &RangeImage,
    dt: f64,
) -> Result<LoomingMap, LoomingError> {
    loom_from_grids_clamped(prev, curr, dt, DEFAULT_CLAMP)
}

/// Looming from two consecutive range images.
///
/// Per cell: L = −((r_curr − r_prev)/dt) / r_curr where both cells are
/// VALID; EMPTY wherever either scan lacks a return.
pub fn loom_from_grids_clamped(
    prev: &RangeImage,
    curr: &RangeImage,
    dt: f64,
    l_max: f64,
) -> Result<LoomingMap, LoomingError> {
    if prev.spec() != curr.spec() {
        return Err(LoomingError::SpecMismatch);
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(LoomingError::InvalidInput("dt must be finite and > 0"));
    }
    if l_max <= 0.0 || !l_max.is_finite() {
        return Err(LoomingError::InvalidInput("clamp must be finite and > 0"));
    }
    let spec = *prev.spec();
    let mut map = LoomingMap::empty(spec, dt);
    for row in 0..spec.height {
        for col in 0..spec.width {
            if let (Some(rp), Some(rc)) = (prev.get(col, row), curr.get(col, row)) {
                let raw = -((rc - rp) / dt) / rc;
                map.set_clamped(spec.cell_index(col, row), raw, l_max);
            }
        }
    }
    Ok(map)
}

/// Instantaneous looming from per-point ranges and the vehicle
/// translation velocity, with default range cap and clamp.
pub fn loom_from_velocity(cloud: &PointCloud, t: Vec3, spec: GridSpec) -> LoomingMap {
    loom_from_velocity_clamped(cloud, t, spec, DEFAULT_R_MAX, DEFAULT_CLAMP)
}

/// Instantaneous looming L = t·e_r / r for every point, binned onto the
/// grid. When several points land in one cell the looming of the
/// nearest point wins, mirroring the projection min rule. No rotation
/// input exists: looming is independent of sensor rotation.
pub fn loom_from_velocity_clamped(
    cloud: &PointCloud,
    t: Vec3,
    spec: GridSpec,
    r_max: f64,
    l_max: f64,
) -> LoomingMap {
    let mut map = LoomingMap::empty(spec, 0.0);
    let mut best_range = vec![f64::INFINITY; spec.len()];
    let mut raw = vec![0.0f64; spec.len()];
    for p in &cloud.points {
        if p.norm_squared() == 0.0 {
            continue;
        }
        let s = cart_to_spherical(*p);
        let (col, row) = match (spec.theta_index(s.theta), spec.phi_index(s.phi)) {
            (Some(c), Some(r)) => (c, r),
            _ => continue,
        };
        if s.r > r_max {
            continue;
        }
        let i = spec.cell_index(col, row);
        if s.r < best_range[i] {
            best_range[i] = s.r;
            // Range is positive here, so the radial form cannot fail.
            raw[i] = looming_radial(t, s).expect("nonzero range").0;
        }
    }
    for i in 0..spec.len() {
        if best_range[i].is_finite() {
            map.set_clamped(i, raw[i], l_max);
        }
    }
    map
}

/// Classify every cell of a looming map into threat zones. EMPTY cells
/// classify as `None`.
pub fn classify_threat(map: &LoomingMap, thresholds: ThreatThresholds) -> ThreatMap {
    let spec = *map.spec();
    let mut classes = vec![ThreatClass::None; spec.len()];
    for (col, row, l) in map.iter_valid() {
        classes[spec.cell_index(col, row)] = thresholds.classify(l);
    }
    ThreatMap {
        spec,
        classes,
        thresholds,
    }
}

/// The sphere of points sharing looming `level` for translation velocity
/// `t`: center t/(2·level), radius |t|/(2·|level|). Every surface point p
/// except the origin satisfies t·p/(p·p) = level.
pub fn equal_looming_sphere(t: Vec3, level: f64) -> Result<EqualLoomingSphere, LoomingError> {
    if level == 0.0 || !level.is_finite() {
        return Err(LoomingError::ZeroLevel);
    }
    let speed = t.norm();
    if speed == 0.0 {
        return Err(LoomingError::InvalidInput(
            "translation velocity must be nonzero",
        ));
    }
    Ok(EqualLoomingSphere {
        center: t.scaled(1.0 / (2.0 * level)),
        radius: speed / (2.0 * level.abs()),
        level,
    })
}

/// Compare an estimated looming map against a reference map cell by
/// cell, over cells VALID in both and not excluded by `edges`.
///
/// Percentiles use the nearest-rank convention on the sorted absolute
/// errors, so the reduction is deterministic regardless of evaluation
/// order. An empty intersection yields `cells == 0` with NaN statistics.
pub fn compare_maps(
    est: &LoomingMap,
    truth: &LoomingMap,
    edges: Option<&EdgeMask>,
) -> Result<ErrorStats, LoomingError> {
    if est.spec() != truth.spec() {
        return Err(LoomingError::SpecMismatch);
    }
    if let Some(mask) = edges {
        if mask.spec() != est.spec() {
            return Err(LoomingError::SpecMismatch);
        }
    }
    let spec = *est.spec();
    let mut abs_errors = Vec::new();
    let mut within = 0usize;
    for row in 0..spec.height {
        for col in 0..spec.width {
            if let Some(mask) = edges {
                if mask.is_excluded(col, row) {
                    continue;
                }
            }
            if let (Some(e), Some(t)) = (est.get(col, row), truth.get(col, row)) {
                let err = (e - t).abs();
                if err <= 0.1 * t.abs() {
                    within += 1;
                }
                abs_errors.push(err);
            }
        }
    }
    if abs_errors.is_empty() {
        return Ok(ErrorStats {
            cells: 0,
            median_abs: f64::NAN,
            p90_abs: f64::NAN,
            frac_within_10pct: f64::NAN,
        });
    }
    abs_errors.sort_by(f64::total_cmp);
    let n = abs_errors.len();
    Ok(ErrorStats {
        cells: n,
        median_abs: nearest_rank(&abs_errors, 50.0),
        p90_abs: nearest_rank(&abs_errors, 90.0),
        frac_within_10pct: within as f64 / n as f64,
    })
}

fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let k = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}
