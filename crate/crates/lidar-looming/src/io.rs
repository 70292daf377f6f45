//! On-disk formats: Velodyne `.bin` point clouds, ego-motion CSV logs,
//! `RGRID`/`LGRID` grid files, and PPM renderings.
//!
//! Grid files carry an ASCII header line followed by a little-endian
//! 32-bit float payload in row-major (elevation-major) order:
//!
//! ```text
//! RGRID 1 <width> <height> <theta_min> <theta_max> <phi_min> <phi_max> <timestamp>\n
//! LGRID 1 <width> <height> <theta_min> <theta_max> <phi_min> <phi_max> <dt>\n
//! ```
//!
//! `RGRID` encodes EMPTY cells as −1.0. `LGRID` values may legitimately
//! be negative, so its mask is a trailing width×height byte block
//! (0 = EMPTY, 1 = VALID) and EMPTY value slots are written as +0.0.
//! Header floats use the shortest decimal form that round-trips, so
//! write → read → write reproduces a file byte for byte.
//!
//! All writers assemble the full byte buffer and then publish it with a
//! temp-file + rename, so readers never observe a partial file.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::geometry::Vec3;
use crate::looming::{LoomingError, LoomingMap, ThreatClass, ThreatMap};
use crate::range_image::{GridError, GridSpec, PointCloud, RangeImage};

/// Bytes per Velodyne `.bin` record: four little-endian f32 fields
/// (x, y, z, reflectance).
pub const VELODYNE_RECORD_BYTES: usize = 16;

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    /// File length is not a whole number of records; `offset` is where
    /// the incomplete record starts.
    Truncated {
        offset: u64,
    },
    BadMagic {
        expected: &'static str,
        found: String,
    },
    BadVersion {
        expected: u32,
        found: String,
    },
    BadHeader {
        msg: String,
    },
    PayloadLength {
        expected: usize,
        actual: usize,
    },
    BadCell {
        index: usize,
        msg: String,
    },
    MalformedLine {
        line: usize,
        msg: String,
    },
    NonMonotoneTimestamps {
        line: usize,
    },
    NoRecords,
    Grid(GridError),
    Looming(LoomingError),
    InvalidScale,
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "i/o error: {e}"),
            IoError::Truncated { offset } => {
                write!(
                    f,
                    "truncated file: incomplete record at byte offset {offset}"
                )
            }
            IoError::BadMagic { expected, found } => {
                write!(f, "bad magic: expected {expected:?}, found {found:?}")
            }
            IoError::BadVersion { expected, found } => {
                write!(f, "unsupported version {found:?}, expected {expected}")
            }
            IoError::BadHeader { msg } => write!(f, "bad header: {msg}"),
            IoError::PayloadLength { expected, actual } => {
                write!(
                    f,
                    "payload length mismatch: expected {expected} bytes, got {actual}"
                )
            }
            IoError::BadCell { index, msg } => write!(f, "cell {index}: {msg}"),
            IoError::MalformedLine { line, msg } => write!(f, "line {line}: {msg}"),
            IoError::NonMonotoneTimestamps { line } => {
                write!(f, "line {line}: timestamps must be strictly increasing")
            }
            IoError::NoRecords => write!(f, "file contains no records"),
            IoError::Grid(e) => write!(f, "{e}"),
            IoError::Looming(e) => write!(f, "{e}"),
            IoError::InvalidScale => write!(f, "color scale saturation must be > 0"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

impl From<GridError> for IoError {
    fn from(e: GridError) -> Self {
        IoError::Grid(e)
    }
}

impl From<LoomingError> for IoError {
    fn from(e: LoomingError) -> Self {
        IoError::Looming(e)
    }
}

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Velodyne .bin clouds

/// Read a Velodyne `.bin` scan: consecutive 16-byte records of four
/// little-endian f32 values (x, y, z, reflectance).
///
/// Returns the cloud plus the count of records dropped for holding
/// non-finite values. Never panics on arbitrary bytes.
pub fn read_velodyne_bin(path: &Path) -> Result<(PointCloud, usize), IoError> {
    let bytes = fs::read(path)?;
    if bytes.len() % VELODYNE_RECORD_BYTES != 0 {
        let offset = (bytes.len() - bytes.len() % VELODYNE_RECORD_BYTES) as u64;
        return Err(IoError::Truncated { offset });
    }
    let mut points = Vec::with_capacity(bytes.len() / VELODYNE_RECORD_BYTES);
    let mut intensities = Vec::with_capacity(points.capacity());
    let mut dropped = 0usize;
    for rec in bytes.chunks_exact(VELODYNE_RECORD_BYTES) {
        let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap());
        let (x, y, z, refl) = (f(0), f(1), f(2), f(3));
        if !(x.is_finite() && y.is_finite() && z.is_finite() && refl.is_finite()) {
            dropped += 1;
            continue;
        }
        points.push(Vec3::new(x as f64, y as f64, z as f64));
        intensities.push(refl);
    }
    Ok((
        PointCloud {
            points,
            intensities: Some(intensities),
            timestamp: 0.0,
        },
        dropped,
    ))
}

/// Write a cloud in Velodyne `.bin` layout. Missing intensities are
/// written as 0.
pub fn write_velodyne_bin(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    let mut buf = Vec::with_capacity(cloud.len() * VELODYNE_RECORD_BYTES);
    for (i, p) in cloud.points.iter().enumerate() {
        let refl = cloud.intensities.as_ref().map_or(0.0f32, |v| v[i]);
        for value in [p.x as f32, p.y as f32, p.z as f32, refl] {
            buf.extend_from_slice(&value.to_le_bytes());
        }
    }
    atomic_write(path, &buf)
}

// ---------------------------------------------------------------------------
// Ego-motion logs

/// One ego-motion sample: sensor-frame translation velocity at a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoMotionRecord {
    pub timestamp: f64,
    pub t: Vec3,
}

/// Time-ordered ego-motion samples with linear interpolation between
/// them and clamping outside the covered interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoMotionLog {
    records: Vec<EgoMotionRecord>,
}

impl EgoMotionLog {
    pub fn new(records: Vec<EgoMotionRecord>) -> Result<Self, IoError> {
        if records.is_empty() {
            return Err(IoError::NoRecords);
        }
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].timestamp.partial_cmp(&pair[0].timestamp)
                != Some(std::cmp::Ordering::Greater)
            {
                return Err(IoError::NonMonotoneTimestamps { line: i + 2 });
            }
        }
        Ok(EgoMotionLog { records })
    }

    pub fn records(&self) -> &[EgoMotionRecord] {
        &self.records
    }

    /// Velocity at `time`: exact at record timestamps, linear between
    /// them, clamped to the first/last record outside the log.
    pub fn velocity_at(&self, time: f64) -> Vec3 {
        let recs = &self.records;
        if time <= recs[0].timestamp {
            return recs[0].t;
        }
        if time >= recs[recs.len() - 1].timestamp {
            return recs[recs.len() - 1].t;
        }
        let hi = recs.partition_point(|r| r.timestamp < time);
        let (a, b) = (recs[hi - 1], recs[hi]);
        if b.timestamp == time {
            return b.t;
        }
        let w = (time - a.timestamp) / (b.timestamp - a.timestamp);
        a.t + (b.t - a.t).scaled(w)
    }
}

/// Read an ego-motion CSV: lines of `timestamp,vx,vy,vz`, `#` comments.
/// Timestamps must be strictly increasing.
pub fn read_ego_motion(path: &Path) -> Result<EgoMotionLog, IoError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut prev_ts: Option<f64> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(IoError::MalformedLine {
                line: line_no,
                msg: format!("expected timestamp,vx,vy,vz, got {} fields", fields.len()),
            });
        }
        let mut nums = [0.0f64; 4];
        for (slot, field) in nums.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|e| IoError::MalformedLine {
                line: line_no,
                msg: format!("bad number {field:?}: {e}"),
            })?;
        }
        if let Some(prev) = prev_ts {
            if nums[0].partial_cmp(&prev) != Some(std::cmp::Ordering::Greater) {
                return Err(IoError::NonMonotoneTimestamps { line: line_no });
            }
        }
        prev_ts = Some(nums[0]);
        records.push(EgoMotionRecord {
            timestamp: nums[0],
            t: Vec3::new(nums[1], nums[2], nums[3]),
        });
    }
    if records.is_empty() {
        return Err(IoError::NoRecords);
    }
    Ok(EgoMotionLog { records })
}

// ---------------------------------------------------------------------------
// Grid files

const RGRID_MAGIC: &str = "RGRID";
const LGRID_MAGIC: &str = "LGRID";
const GRID_VERSION: u32 = 1;

fn grid_header(magic: &str, spec: &GridSpec, last_field: f64) -> String {
    format!(
        "{magic} {GRID_VERSION} {} {} {} {} {} {} {}\n",
        spec.width,
        spec.height,
        spec.theta_min,
        spec.theta_max,
        spec.phi_min,
        spec.phi_max,
        last_field
    )
}

/// Parsed header: grid spec plus the trailing field (timestamp or dt).
fn parse_grid_header(bytes: &[u8], magic: &'static str) -> Result<(GridSpec, f64, usize), IoError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(IoError::BadHeader {
            msg: "missing header line".into(),
        })?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| IoError::BadHeader {
        msg: "header is not UTF-8".into(),
    })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 9 {
        return Err(IoError::BadHeader {
            msg: format!("expected 9 header fields, got {}", tokens.len()),
        });
    }
    if tokens[0] != magic {
        return Err(IoError::BadMagic {
            expected: magic,
            found: tokens[0].to_string(),
        });
    }
    if tokens[1] != GRID_VERSION.to_string() {
        return Err(IoError::BadVersion {
            expected: GRID_VERSION,
            found: tokens[1].to_string(),
        });
    }
    let width: usize = tokens[2].parse().map_err(|_| IoError::BadHeader {
        msg: format!("bad width {:?}", tokens[2]),
    })?;
    let height: usize = tokens[3].parse().map_err(|_| IoError::BadHeader {
        msg: format!("bad height {:?}", tokens[3]),
    })?;
    let mut angles = [0.0f64; 5];
    for (slot, tok) in angles.iter_mut().zip(&tokens[4..9]) {
        *slot = tok.parse().map_err(|_| IoError::BadHeader {
            msg: format!("bad number {tok:?}"),
        })?;
    }
    let spec = GridSpec::new(width, height, angles[0], angles[1], angles[2], angles[3])?;
    Ok((spec, angles[4], nl + 1))
}

/// Write a range image as an `RGRID` file. Cells are stored as f32;
/// EMPTY cells are encoded as −1.0.
pub fn write_range_grid(img: &RangeImage, path: &Path) -> Result<(), IoError> {
    let spec = img.spec();
    let mut buf = grid_header(RGRID_MAGIC, spec, img.timestamp).into_bytes();
    buf.reserve(spec.len() * 4);
    for (&v, &ok) in img.values().iter().zip(img.mask()) {
        let cell = if ok { v as f32 } else { -1.0f32 };
        buf.extend_from_slice(&cell.to_le_bytes());
    }
    atomic_write(path, &buf)
}

/// Read an `RGRID` file.
pub fn read_range_grid(path: &Path) -> Result<RangeImage, IoError> {
    let bytes = fs::read(path)?;
    let (spec, timestamp, offset) = parse_grid_header(&bytes, RGRID_MAGIC)?;
    let payload = &bytes[offset..];
    if payload.len() != spec.len() * 4 {
        return Err(IoError::PayloadLength {
            expected: spec.len() * 4,
            actual: payload.len(),
        });
    }
    let mut values = vec![0.0f64; spec.len()];
    let mut valid = vec![false; spec.len()];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if v == -1.0 {
            continue;
        }
        if v <= 0.0 || !v.is_finite() {
            return Err(IoError::BadCell {
                index: i,
                msg: format!("range must be > 0 or the EMPTY sentinel -1, got {v}"),
            });
        }
        values[i] = v as f64;
        valid[i] = true;
    }
    Ok(RangeImage::from_raw(spec, values, valid, timestamp)?)
}

/// Write a looming map as an `LGRID` file. The header's trailing field
/// is the map's `dt`; EMPTY value slots are written as +0.0 and the
/// mask block trails the values.
pub fn write_looming_grid(map: &LoomingMap, path: &Path) -> Result<(), IoError> {
    let spec = map.spec();
    let mut buf = grid_header(LGRID_MAGIC, spec, map.dt).into_bytes();
    buf.reserve(spec.len() * 5);
    for (&v, &ok) in map.values().iter().zip(map.mask()) {
        let cell = if ok { v as f32 } else { 0.0f32 };
        buf.extend_from_slice(&cell.to_le_bytes());
    }
    for &ok in map.mask() {
        buf.push(u8::from(ok));
    }
    atomic_write(path, &buf)
}

/// Read an `LGRID` file.
pub fn read_looming_grid(path: &Path) -> Result<LoomingMap, IoError> {
    let bytes = fs::read(path)?;
    let (spec, dt, offset) = parse_grid_header(&bytes, LGRID_MAGIC)?;
    let payload = &bytes[offset..];
    let expected = spec.len() * 5;
    if payload.len() != expected {
        return Err(IoError::PayloadLength {
            expected,
            actual: payload.len(),
        });
    }
    let (value_bytes, mask_bytes) = payload.split_at(spec.len() * 4);
    let mut values = vec![0.0f64; spec.len()];
    let mut valid = vec![false; spec.len()];
    for (i, (chunk, &m)) in value_bytes.chunks_exact(4).zip(mask_bytes).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        match m {
            0 => {
                if v != 0.0 || v.is_sign_negative() {
                    return Err(IoError::BadCell {
                        index: i,
                        msg: format!("EMPTY cell must store +0.0, got {v}"),
                    });
                }
            }
            1 => {
                if !v.is_finite() {
                    return Err(IoError::BadCell {
                        index: i,
                        msg: format!("valid cell holds non-finite value {v}"),
                    });
                }
                values[i] = v as f64;
                valid[i] = true;
            }
            other => {
                return Err(IoError::BadCell {
                    index: i,
                    msg: format!("mask byte must be 0 or 1, got {other}"),
                });
            }
        }
    }
    Ok(LoomingMap::from_raw(spec, values, valid, dt)?)
}

// ---------------------------------------------------------------------------
// PPM rendering

/// Fixed red/blue color scale for looming renderings. `l_saturation` is
/// the looming magnitude mapping to full channel intensity; it is held
/// constant across frames so threat growth stays visible in a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScale {
    pub l_saturation: f64,
}

impl ColorScale {
    pub fn new(l_saturation: f64) -> Result<Self, IoError> {
        if l_saturation <= 0.0 || !l_saturation.is_finite() {
            return Err(IoError::InvalidScale);
        }
        Ok(ColorScale { l_saturation })
    }
}

impl Default for ColorScale {
    fn default() -> Self {
        ColorScale { l_saturation: 1.0 }
    }
}

fn ppm_buffer(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut buf = format!("P6\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(rgb);
    buf
}

fn channel(value: f64, saturation: f64) -> u8 {
    (255.0 * (value / saturation).min(1.0)).round() as u8
}

/// Render a looming map as binary PPM: positive values in red, negative
/// in blue, EMPTY cells black. The image's top row is the highest
/// elevation; column 0 is the azimuth span start.
pub fn write_looming_ppm(map: &LoomingMap, scale: ColorScale, path: &Path) -> Result<(), IoError> {
    if scale.l_saturation <= 0.0 || !scale.l_saturation.is_finite() {
        return Err(IoError::InvalidScale);
    }
    let spec = map.spec();
    let mut rgb = Vec::with_capacity(spec.len() * 3);
    for row in (0..spec.height).rev() {
        for col in 0..spec.width {
            let px = match map.get(col, row) {
                None => [0, 0, 0],
                Some(l) if l >= 0.0 => [channel(l, scale.l_saturation), 0, 0],
                Some(l) => [0, 0, channel(-l, scale.l_saturation)],
            };
            rgb.extend_from_slice(&px);
        }
    }
    atomic_write(path, &ppm_buffer(spec.width, spec.height, &rgb))
}

/// Threat zone palette: high red, medium orange, low yellow, none black.
pub fn threat_palette(class: ThreatClass) -> [u8; 3] {
    match class {
        ThreatClass::None => [0, 0, 0],
        ThreatClass::Low => [255, 255, 0],
        ThreatClass::Medium => [255, 165, 0],
        ThreatClass::High => [255, 0, 0],
    }
}

/// Inverse of [`threat_palette`]; None for a pixel outside the palette.
pub fn threat_class_from_pixel(px: [u8; 3]) -> Option<ThreatClass> {
    match px {
        [0, 0, 0] => Some(ThreatClass::None),
        [255, 255, 0] => Some(ThreatClass::Low),
        [255, 165, 0] => Some(ThreatClass::Medium),
        [255, 0, 0] => Some(ThreatClass::High),
        _ => None,
    }
}

/// Render a threat map as binary PPM using [`threat_palette`].
pub fn write_threat_ppm(map: &ThreatMap, path: &Path) -> Result<(), IoError> {
    let spec = map.spec();
    let mut rgb = Vec::with_capacity(spec.len() * 3);
    for row in (0..spec.height).rev() {
        for col in 0..spec.width {
            rgb.extend_from_slice(&threat_palette(map.get(col, row)));
        }
    }
    atomic_write(path, &ppm_buffer(spec.width, spec.height, &rgb))
}

/// Read a binary PPM (P6, maxval 255) back as (width, height, rgb).
pub fn read_ppm(path: &Path) -> Result<(usize, usize, Vec<u8>), IoError> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String, IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IoError::BadHeader {
                msg: "unexpected end of PPM header".into(),
            });
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(&bytes)?;
    if magic != "P6" {
        return Err(IoError::BadMagic {
            expected: "P6",
            found: magic,
        });
    }
    let width: usize = token(&bytes)?.parse().map_err(|_| IoError::BadHeader {
        msg: "bad width".into(),
    })?;
    let height: usize = token(&bytes)?.parse().map_err(|_| IoError::BadHeader {
        msg: "bad height".into(),
    })?;
    let maxval = token(&bytes)?;
    if maxval != "255" {
        return Err(IoError::BadHeader {
            msg: format!("unsupported maxval {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the pixels.
    pos += 1;
    let expected = width * height * 3;
    let actual = bytes.len().saturating_sub(pos);
    if actual != expected {
        return Err(IoError::PayloadLength { expected, actual });
    }
    Ok((width, height, bytes[pos..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::looming::{classify_threat, ThreatThresholds, DEFAULT_CLAMP};
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    fn small_spec() -> GridSpec {
        GridSpec::new(6, 3, -2.0, 2.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn velodyne_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.bin");
        let cloud = PointCloud {
            points: vec![Vec3::new(10.0, 0.0, 0.0), Vec3::new(1.0, 2.0, -0.5)],
            intensities: Some(vec![0.5, 0.25]),
            timestamp: 0.0,
        };
        write_velodyne_bin(&path, &cloud).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 32);
        let (read, dropped) = read_velodyne_bin(&path).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(read.points, cloud.points);
        assert_eq!(read.intensities, cloud.intensities);
    }

    #[test]
    fn velodyne_truncated_reports_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.bin");
        fs::write(&path, [0u8; 40]).unwrap();
        match read_velodyne_bin(&path) {
            Err(IoError::Truncated { offset }) => assert_eq!(offset, 32),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn velodyne_drops_non_finite() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.bin");
        let mut buf = Vec::new();
        for v in [10.0f32, 0.0, 0.0, 0.5] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in [f32::NAN, 0.0, 0.0, 0.5] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &buf).unwrap();
        let (cloud, dropped) = read_velodyne_bin(&path).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(dropped, 1);
        assert_eq!(cloud.points[0], Vec3::new(10.0, 0.0, 0.0));
    }

    #[test]
    fn ego_motion_interpolation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ego.csv");
        fs::write(&path, "# t,vx,vy,vz\n0.0,5,0,0\n1.0,7,0,0\n").unwrap();
        let log = read_ego_motion(&path).unwrap();
        assert_eq!(log.velocity_at(0.5), Vec3::new(6.0, 0.0, 0.0));
        assert_eq!(log.velocity_at(-1.0), Vec3::new(5.0, 0.0, 0.0));
        assert_eq!(log.velocity_at(2.0), Vec3::new(7.0, 0.0, 0.0));
        assert_eq!(log.velocity_at(1.0), Vec3::new(7.0, 0.0, 0.0));
    }

    #[test]
    fn ego_motion_errors_name_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ego.csv");
        fs::write(&path, "0.0,5,0,0\n1.0,oops,0,0\n").unwrap();
        match read_ego_motion(&path) {
            Err(IoError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed line, got {other:?}"),
        }
        fs::write(&path, "1.0,5,0,0\n0.5,6,0,0\n").unwrap();
        match read_ego_motion(&path) {
            Err(IoError::NonMonotoneTimestamps { line }) => assert_eq!(line, 2),
            other => panic!("expected monotonicity error, got {other:?}"),
        }
    }

    #[test]
    fn rgrid_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.rgrid");
        let mut img = RangeImage::empty(small_spec(), 2.5);
        img.set(0, 0, 10.0);
        img.set(5, 2, 119.5);
        write_range_grid(&img, &path).unwrap();
        let read = read_range_grid(&path).unwrap();
        assert_eq!(read, img);

        // A second write of what was read reproduces the file bit for bit.
        let path2 = dir.path().join("scan2.rgrid");
        write_range_grid(&read, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn rgrid_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.rgrid");
        fs::write(&path, b"XGRID 1 2 2 0 1 0 1 0\n0000000000000000").unwrap();
        match read_range_grid(&path) {
            Err(IoError::BadMagic { expected, found }) => {
                assert_eq!(expected, "RGRID");
                assert_eq!(found, "XGRID");
            }
            other => panic!("expected magic error, got {other:?}"),
        }
    }

    #[test]
    fn rgrid_version_mismatch() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.rgrid");
        fs::write(&path, b"RGRID 2 2 2 0 1 0 1 0\n0000000000000000").unwrap();
        assert!(matches!(
            read_range_grid(&path),
            Err(IoError::BadVersion { .. })
        ));
    }

    #[test]
    fn lgrid_round_trip_and_mask_length() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.lgrid");
        let spec = small_spec();
        let mut map = LoomingMap::empty(spec, 0.1);
        map.set_clamped(spec.cell_index(1, 1), 0.25, DEFAULT_CLAMP);
        map.set_clamped(spec.cell_index(2, 1), -0.5, DEFAULT_CLAMP);
        write_looming_grid(&map, &path).unwrap();
        let read = read_looming_grid(&path).unwrap();
        assert_eq!(read.spec(), map.spec());
        assert_eq!(read.dt, map.dt);
        assert_eq!(read.values(), map.values());
        assert_eq!(read.mask(), map.mask());

        // Chop one mask byte off: the reader must name both sizes.
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        match read_looming_grid(&path) {
            Err(IoError::PayloadLength { expected, actual }) => {
                assert_eq!(expected, spec.len() * 5);
                assert_eq!(actual, spec.len() * 5 - 1);
            }
            other => panic!("expected payload length error, got {other:?}"),
        }
    }

    #[test]
    fn looming_ppm_pixels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.ppm");
        let spec = small_spec();
        let scale = ColorScale::default();

        let empty = LoomingMap::empty(spec, 0.0);
        write_looming_ppm(&empty, scale, &path).unwrap();
        let (w, h, rgb) = read_ppm(&path).unwrap();
        assert_eq!((w, h), (spec.width, spec.height));
        assert!(rgb.iter().all(|&b| b == 0));

        let mut map = LoomingMap::empty(spec, 0.0);
        map.set_clamped(spec.cell_index(0, 2), 1.0, DEFAULT_CLAMP); // saturated positive
        map.set_clamped(spec.cell_index(1, 2), -0.5, DEFAULT_CLAMP); // half negative
        write_looming_ppm(&map, scale, &path).unwrap();
        let (_, _, rgb) = read_ppm(&path).unwrap();
        // Row 2 is the top image row.
        assert_eq!(&rgb[0..3], &[255, 0, 0]);
        assert_eq!(&rgb[3..6], &[0, 0, 128]);
    }

    #[test]
    fn ppm_output_is_deterministic() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.ppm");
        let b = dir.path().join("b.ppm");
        let spec = small_spec();
        let mut map = LoomingMap::empty(spec, 0.0);
        map.set_clamped(spec.cell_index(3, 1), 0.7, DEFAULT_CLAMP);
        write_looming_ppm(&map, ColorScale::default(), &a).unwrap();
        write_looming_ppm(&map, ColorScale::default(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn threat_ppm_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("threat.ppm");
        let spec = small_spec();
        let mut map = LoomingMap::empty(spec, 0.0);
        map.set_clamped(spec.cell_index(0, 0), 1.5, DEFAULT_CLAMP);
        map.set_clamped(spec.cell_index(1, 0), 0.7, DEFAULT_CLAMP);
        map.set_clamped(spec.cell_index(2, 0), 0.3, DEFAULT_CLAMP);
        let threat = classify_threat(&map, ThreatThresholds::new(0.2, 0.5, 1.0).unwrap());
        write_threat_ppm(&threat, &path).unwrap();
        let (w, h, rgb) = read_ppm(&path).unwrap();
        assert_eq!((w, h), (spec.width, spec.height));
        for row in 0..spec.height {
            for col in 0..spec.width {
                let image_row = spec.height - 1 - row;
                let o = (image_row * spec.width + col) * 3;
                let px = [rgb[o], rgb[o + 1], rgb[o + 2]];
                assert_eq!(threat_class_from_pixel(px), Some(threat.get(col, row)));
            }
        }
    }

    #[test]
    fn header_floats_round_trip_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.rgrid");
        let spec = GridSpec::new(
            4,
            2,
            -std::f64::consts::PI,
            std::f64::consts::PI,
            (-24.8f64).to_radians(),
            2.0f64.to_radians(),
        )
        .unwrap();
        let mut img = RangeImage::empty(spec, 0.123456789);
        img.set(2, 1, 42.5);
        write_range_grid(&img, &path).unwrap();
        let read = read_range_grid(&path).unwrap();
        assert_eq!(read.spec(), &spec);
        assert_eq!(read.timestamp, 0.123456789);
        assert_relative_eq!(read.get(2, 1).unwrap(), 42.5, max_relative = 0.0);
    }
}
